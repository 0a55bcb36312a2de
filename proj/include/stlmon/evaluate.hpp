#pragma once

#include "stlmon/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stlmon {

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Metrics {
  double precision = 0, recall = 0, f1 = 0, far = 0, mcc = 0;
};

struct TraceOutcome {
  std::string id;
  bool actual_failure = false;
  bool predicted_failure = false;
  std::optional<std::size_t> first_bot;
  std::optional<double> preemptiveness;  // set for true positives only
};

struct Report {
  ConfusionMatrix cm;
  Metrics metrics;
  double mean_preemptiveness = 0.0;  // over true positives; 0 when there are none
  std::string preemptiveness_unit = "sample";
  std::vector<TraceOutcome> detail;
};

/// True iff any pool entry's monitor reaches Bot; earliest such position.
std::pair<bool, std::optional<std::size_t>> classify_trace(const std::vector<PoolEntry>& pool,
                                                           const Trace& t);

/// Appendix-style classification metrics with zero-denominator guards.
Metrics compute_metrics(const ConfusionMatrix& cm);

/// Samples between first decisive verdict and end of trace.
double preemptiveness(const Trace& t, std::size_t first_bot);

/// Classify every test trace against the pool (after normalization), then
/// aggregate the confusion matrix, metrics, and mean preemptiveness.
Report evaluate(const std::vector<PoolEntry>& pool, const Dataset& test,
                const NormalizationParams& norm);

std::string format_report(const Report& r);

}  // namespace stlmon
