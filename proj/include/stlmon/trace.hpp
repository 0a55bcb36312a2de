#pragma once

#include "stlmon/formula.hpp"
#include "stlmon/random.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace stlmon {

/// Finite, nonempty multivariate trace. values is row-major, length x arity.
struct Trace {
  std::string id;
  std::size_t length = 0;
  std::size_t arity = 0;
  std::vector<double> values;
  bool is_failure = false;
  std::string sampling_unit = "sample";

  double at(std::size_t t, std::size_t var) const { return values[t * arity + var]; }
  double& at(std::size_t t, std::size_t var) { return values[t * arity + var]; }
};

struct Dataset {
  std::vector<Trace> traces;
  std::vector<std::string> variables;
  std::string sampling_unit = "sample";
};

/// Per-variable min/max fitted on training data.
struct NormalizationParams {
  std::vector<double> min;
  std::vector<double> max;
};

/// Padded 3-axis block: traces x time x variables, plus per-trace lengths.
struct TraceBatch {
  std::size_t count = 0;
  std::size_t max_length = 0;
  std::size_t arity = 0;
  std::vector<double> block;  // count * max_length * arity
  std::vector<std::size_t> lengths;

  double at(std::size_t k, std::size_t t, std::size_t var) const {
    return block[(k * max_length + t) * arity + var];
  }
};

/// Failure trace with its noisy copies.
struct AugmentedPair {
  Trace original;
  std::vector<Trace> augmentations;
};

/// CSV columns: trace_id, t, <variables...>, is_failure.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& d, const std::string& path);

NormalizationParams normalize_fit(const Dataset& train);
Dataset normalize_apply(const NormalizationParams& p, const Dataset& d);
Trace normalize_apply(const NormalizationParams& p, const Trace& t);

/// Gaussian-noise copies, clipped to [0,1]. Deterministic for a given rng state.
std::vector<Trace> augment(const Trace& t, std::size_t count, double noise_std, Rng& rng);

TraceBatch batch(const std::vector<Trace>& traces);
TraceBatch batch_one(const Trace& t);
std::vector<Trace> unbatch(const TraceBatch& b);

/// Prefix of length v, 1 <= v <= |t|.
Trace cut(const Trace& t, std::size_t v);

struct SynthConfig {
  std::size_t n_good = 0;
  std::size_t n_fail = 0;
  std::size_t length = 50;
  std::size_t arity = 2;
  double walk_step = 0.05;
  std::size_t retry_budget = 2000;
  bool allow_empty = false;
};

/// Planted-detector dataset: good traces never trigger the detector, failure
/// traces have a clean prefix followed by a suffix where it fires.
Dataset synth_generate(const FormulaPtr& planted, const SynthConfig& cfg, Rng& rng);

}  // namespace stlmon
