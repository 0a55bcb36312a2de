#include "stlmon/evaluate.hpp"

#include "stlmon/engine.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stlmon {

std::pair<bool, std::optional<std::size_t>> classify_trace(const std::vector<PoolEntry>& pool,
                                                           const Trace& t) {
  std::optional<std::size_t> first;
  TraceBatch b = batch_one(t);
  for (const auto& e : pool) {
    if (max_var_index(*e.formula) >= static_cast<int>(t.arity))
      throw std::invalid_argument("pool formula arity exceeds trace arity");
    auto mt = monitor(e.formula, b);
    const auto& m = mt.front();
    if (m.first_decision && m.verdicts[*m.first_decision] == Verdict::Bot)
      if (!first || *m.first_decision < *first) first = m.first_decision;
  }
  return {first.has_value(), first};
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
  auto tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
  auto tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
  Metrics m;
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.far = fp + tn > 0 ? fp / (fp + tn) : 0.0;
  double d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = d > 0 ? (tp * tn - fp * fn) / std::sqrt(d) : 0.0;
  return m;
}

double preemptiveness(const Trace& t, std::size_t first_bot) {
  if (first_bot >= t.length) throw std::invalid_argument("decision position out of trace");
  return static_cast<double>(t.length - 1 - first_bot);
}

Report evaluate(const std::vector<PoolEntry>& pool, const Dataset& test,
                const NormalizationParams& norm) {
  Report r;
  r.preemptiveness_unit = test.sampling_unit;
  double preempt_sum = 0.0;
  std::size_t preempt_n = 0;
  for (const auto& raw : test.traces) {
    Trace t = normalize_apply(norm, raw);
    auto [pred, first] = classify_trace(pool, t);
    TraceOutcome o{raw.id, raw.is_failure, pred, first, std::nullopt};
    if (raw.is_failure) {
      if (pred) {
        ++r.cm.tp;
        o.preemptiveness = preemptiveness(t, *first);
        preempt_sum += *o.preemptiveness;
        ++preempt_n;
      } else {
        ++r.cm.fn;
      }
    } else {
      if (pred)
        ++r.cm.fp;
      else
        ++r.cm.tn;
    }
    r.detail.push_back(std::move(o));
  }
  r.metrics = compute_metrics(r.cm);
  r.mean_preemptiveness = preempt_n ? preempt_sum / static_cast<double>(preempt_n) : 0.0;
  return r;
}

std::string format_report(const Report& r) {
  std::ostringstream out;
  out << "tp\t" << r.cm.tp << "\nfp\t" << r.cm.fp << "\ntn\t" << r.cm.tn << "\nfn\t"
      << r.cm.fn << '\n';
  out << "precision\t" << format_number(r.metrics.precision) << '\n';
  out << "recall\t" << format_number(r.metrics.recall) << '\n';
  out << "f1\t" << format_number(r.metrics.f1) << '\n';
  out << "far\t" << format_number(r.metrics.far) << '\n';
  out << "mcc\t" << format_number(r.metrics.mcc) << '\n';
  out << "mean_preemptiveness\t" << format_number(r.mean_preemptiveness) << '\t'
      << r.preemptiveness_unit << '\n';
  out << "# trace\tactual\tpredicted\tfirst_bot\tpreemptiveness\n";
  for (const auto& o : r.detail) {
    out << o.id << '\t' << (o.actual_failure ? "failure" : "good") << '\t'
        << (o.predicted_failure ? "failure" : "good") << '\t';
    if (o.first_bot)
      out << *o.first_bot;
    else
      out << '-';
    out << '\t';
    if (o.preemptiveness)
      out << format_number(*o.preemptiveness);
    else
      out << '-';
    out << '\n';
  }
  return out.str();
}

}  // namespace stlmon
