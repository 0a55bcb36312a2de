#pragma once

#include "stlmon/formula.hpp"
#include "stlmon/trace.hpp"

#include <optional>
#include <vector>

namespace stlmon {

/// Robustness per (formula, trace, time). Entries past a trace's length are
/// padding and must not be read.
struct RobustnessMatrix {
  std::size_t formulas = 0;
  std::size_t traces = 0;
  std::size_t max_length = 0;
  std::vector<double> values;  // formulas * traces * max_length
  std::vector<std::size_t> lengths;

  double at(std::size_t q, std::size_t k, std::size_t j) const {
    return values[(q * traces + k) * max_length + j];
  }
  double& at(std::size_t q, std::size_t k, std::size_t j) {
    return values[(q * traces + k) * max_length + j];
  }
};

enum class Verdict { Unknown, Top, Bot };

/// Verdict per prefix position; decisions are irrevocable.
struct MonitorTrace {
  std::vector<Verdict> verdicts;
  std::optional<std::size_t> first_decision;
};

/// Vectorized robustness of each formula over the whole batch; every operator
/// node is evaluated once for all (trace, time) cells.
RobustnessMatrix robustness(const std::vector<FormulaPtr>& formulas, const TraceBatch& b);

/// Brute-force reference: direct recursion over the quantitative semantics.
/// Independent of the vectorized path; used as the testing oracle.
double robustness_ref(const Formula& f, const Trace& t, std::size_t i);

/// Monitor a safety (G of pure past) or cosafety (F of pure past) formula over
/// every prefix of every trace in the batch.
std::vector<MonitorTrace> monitor(const FormulaPtr& f, const TraceBatch& b);

/// Earliest position where any detector fires strictly (robustness > 0).
std::optional<std::size_t> earliest_violation(const std::vector<FormulaPtr>& detectors,
                                              const Trace& t);

/// sigma |= f: full-STL formulas checked at position 0, pure-past at the last.
bool trace_check(const FormulaPtr& f, const Trace& t);

}  // namespace stlmon
