#pragma once

#include "stlmon/engine.hpp"
#include "stlmon/formula.hpp"
#include "stlmon/sampler.hpp"
#include "stlmon/trace.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace stlmon {

/// The six fitness quantities of a candidate detector, plus bookkeeping.
struct FitnessRecord {
  double margin = -1.0;              // worst-case best split score, in [-1,1]
  bool ok_orig = false;              // clean split of the original failure trace
  double acc = 0.0;                  // fraction of pair traces split cleanly
  std::optional<double> far;         // false alarm rate over the full good set
  double good_rob_sel = 1.0;         // worst max-robustness over the selection sample
  double good_rob_es = 1.0;          // worst max-robustness over the early-stop sample
  std::optional<double> good_rob_full;
  bool evaluated = false;
};

/// Candidate detector bound to one (failure trace, augmentations) pair.
struct Individual {
  FormulaPtr formula;
  std::size_t pair_id = 0;
  FitnessRecord fitness;
  std::size_t order = 0;  // insertion index, deterministic tiebreak
};

struct EAConfig {
  std::size_t pop_size = 500;
  std::size_t max_gen = 500;
  std::size_t patience = 100;
  double mut_prob = 0.3;
  double cross_prob = 0.9;
  double fract_good = 0.33;
  std::size_t r_interval = 10;
  std::size_t k_opt = 5;
  double min_acc = 0.75;
  double max_far = 0.0;
  std::size_t refine_max_iter = 50;
  GenConfig gen;
  std::vector<double>* hv_log = nullptr;  // optional per-generation hypervolume sink
};

/// Split-point goodness for a full-trace robustness vector (length l), one
/// score per cut position 0..l.
std::vector<double> score_vector(const std::vector<double>& rob);

/// Robustness context of one individual, precomputed by a batched engine call.
struct FitnessInputs {
  std::vector<std::vector<double>> pair_rob;  // original trace first
  std::vector<double> good_sel_maxrob;        // maxRob per selection-sample trace
  std::vector<double> good_es_maxrob;         // maxRob per early-stop-sample trace
};

/// margin / ok_orig / acc / goodRob folds; far is left unset (computed lazily
/// over the full good set after evolution).
FitnessRecord fitness(const FitnessInputs& in);

/// Subtree swap (with height-17 repair) or reference-pair swap, equiprobable.
std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, Rng& rng);

/// Node replacement, shrink, or constant jitter, equiprobable, applied with
/// probability mut_prob / cbrt(generation_index).
Individual mutate(const Individual& a, std::size_t generation_index, const EAConfig& cfg,
                  Rng& rng);

/// NSGA-II survivor selection on (maximize margin, minimize good_rob_sel).
std::vector<Individual> nsga2_select(std::vector<Individual> partition, std::size_t target_size);

/// 2-D hypervolume, margin maximized and good_rob minimized, objectives
/// clamped to [-1,1], reference corner (-1, +1).
double hypervolume_2d(const std::vector<std::pair<double, double>>& points);

/// Traces a refinement objective can be recomputed against.
struct RefineContext {
  std::vector<Trace> pair_traces;   // {sigma} ∪ A_sigma, original first
  std::vector<Trace> good_traces;   // full good set
  std::size_t max_evals = 50;
};

/// Re-optimizes atom thresholds: maximize margin subject to good_rob_full < 0.
/// Interval bounds are untouched; never returns a worse individual.
Individual refine_constants(const Individual& ind, const RefineContext& ctx);

struct LearnedFormula {
  FormulaPtr formula;         // pure-past detector
  std::size_t pair_index;
  std::string source_id;
  double acc, far, margin;
};

/// The full evolutionary extraction loop for one batch of pairs.
std::vector<LearnedFormula> learn_formulas(const std::vector<AugmentedPair>& batch_pairs,
                                           const std::vector<Trace>& good_traces,
                                           const EAConfig& cfg, Rng& rng);

}  // namespace stlmon
