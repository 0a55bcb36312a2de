#include "stlmon/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace stlmon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One value per (trace, time) cell of the batch.
struct Layer {
  std::size_t count, max_length;
  std::vector<double> v;

  Layer(std::size_t m, std::size_t l) : count(m), max_length(l), v(m * l, 0.0) {}
  double* row(std::size_t k) { return v.data() + k * max_length; }
  const double* row(std::size_t k) const { return v.data() + k * max_length; }
};

struct Eval {
  const TraceBatch& b;

  Layer atom(const Atom& a) const {
    Layer out(b.count, b.max_length);
    for (const auto& t : a.terms)
      if (t.index < 0 || t.index >= static_cast<int>(b.arity))
        throw std::out_of_range("atom variable index out of range (unbound formula?)");
    for (std::size_t k = 0; k < b.count; ++k) {
      double* o = out.row(k);
      for (std::size_t j = 0; j < b.lengths[k]; ++j) {
        double s = 0;
        for (const auto& t : a.terms) s += t.weight * b.at(k, j, t.index);
        o[j] = s - a.threshold;
      }
    }
    return out;
  }

  Layer negate(Layer x) const {
    for (std::size_t k = 0; k < b.count; ++k) {
      double* o = x.row(k);
      for (std::size_t j = 0; j < b.lengths[k]; ++j) o[j] = -o[j];
    }
    return x;
  }

  Layer max2(Layer x, const Layer& y) const {
    for (std::size_t k = 0; k < b.count; ++k) {
      double* o = x.row(k);
      const double* r = y.row(k);
      for (std::size_t j = 0; j < b.lengths[k]; ++j) o[j] = std::max(o[j], r[j]);
    }
    return x;
  }

  Layer shift_next(const Layer& x) const {
    Layer out(b.count, b.max_length);
    for (std::size_t k = 0; k < b.count; ++k) {
      std::size_t len = b.lengths[k];
      double* o = out.row(k);
      const double* r = x.row(k);
      for (std::size_t j = 0; j + 1 < len; ++j) o[j] = r[j + 1];
      if (len > 0) o[len - 1] = -kInf;
    }
    return out;
  }

  Layer shift_yesterday(const Layer& x) const {
    Layer out(b.count, b.max_length);
    for (std::size_t k = 0; k < b.count; ++k) {
      std::size_t len = b.lengths[k];
      double* o = out.row(k);
      const double* r = x.row(k);
      if (len > 0) o[0] = -kInf;
      for (std::size_t j = 1; j < len; ++j) o[j] = r[j - 1];
    }
    return out;
  }

  // Unbounded until with lo = 0 folds right-to-left:
  //   u[j] = max(rhs[j], min(lhs[j], u[j+1])).
  // A positive lo prepends the window minimum of lhs over [j, j+lo).
  Layer until(const Layer& lhs, const Layer& rhs, Interval I) const {
    Layer out(b.count, b.max_length);
    std::vector<double> u;
    for (std::size_t k = 0; k < b.count; ++k) {
      std::size_t len = b.lengths[k];
      double* o = out.row(k);
      const double* a = lhs.row(k);
      const double* r = rhs.row(k);
      if (I.unbounded()) {
        u.assign(len, -kInf);
        for (std::size_t j = len; j-- > 0;)
          u[j] = std::max(r[j], j + 1 < len ? std::min(a[j], u[j + 1]) : -kInf);
        for (std::size_t j = 0; j < len; ++j) {
          if (j + I.lo >= len) {
            o[j] = -kInf;
            continue;
          }
          double m = u[j + I.lo];
          for (std::size_t x = j; x < j + I.lo; ++x) m = std::min(m, a[x]);
          o[j] = m;
        }
      } else {
        for (std::size_t j = 0; j < len; ++j) {
          if (j + I.hi >= len) {
            o[j] = -kInf;  // strict window fit for bounded intervals
            continue;
          }
          double prefix = kInf;  // min of lhs over [j, x)
          for (std::size_t x = j; x < j + I.lo; ++x) prefix = std::min(prefix, a[x]);
          double acc = -kInf;
          for (std::size_t x = j + I.lo; x <= j + I.hi; ++x) {
            acc = std::max(acc, std::min(r[x], prefix));
            prefix = std::min(prefix, a[x]);
          }
          o[j] = acc;
        }
      }
    }
    return out;
  }

  Layer since(const Layer& lhs, const Layer& rhs, Interval I) const {
    Layer out(b.count, b.max_length);
    std::vector<double> u;
    for (std::size_t k = 0; k < b.count; ++k) {
      std::size_t len = b.lengths[k];
      double* o = out.row(k);
      const double* a = lhs.row(k);
      const double* r = rhs.row(k);
      if (I.unbounded()) {
        u.assign(len, -kInf);
        for (std::size_t j = 0; j < len; ++j)
          u[j] = std::max(r[j], j > 0 ? std::min(a[j], u[j - 1]) : -kInf);
        for (std::size_t j = 0; j < len; ++j) {
          if (j < I.lo) {
            o[j] = -kInf;
            continue;
          }
          double m = u[j - I.lo];
          for (std::size_t x = j - I.lo + 1; x <= j; ++x) m = std::min(m, a[x]);
          o[j] = m;
        }
      } else {
        for (std::size_t j = 0; j < len; ++j) {
          if (j < I.hi) {
            o[j] = -kInf;
            continue;
          }
          double suffix = kInf;  // min of lhs over (x, j]
          for (std::size_t x = j; x + I.lo > j; --x) suffix = std::min(suffix, a[x]);
          double acc = -kInf;
          for (std::size_t off = I.lo; off <= I.hi; ++off) {
            std::size_t x = j - off;
            acc = std::max(acc, std::min(r[x], suffix));
            suffix = std::min(suffix, a[x]);
          }
          o[j] = acc;
        }
      }
    }
    return out;
  }

  // f must already be in core form
  Layer run(const Formula& f) const {
    switch (f.kind) {
      case Kind::True: {
        Layer out(b.count, b.max_length);
        for (std::size_t k = 0; k < b.count; ++k) {
          double* o = out.row(k);
          for (std::size_t j = 0; j < b.lengths[k]; ++j) o[j] = kInf;
        }
        return out;
      }
      case Kind::Atom:
        return atom(f.atom);
      case Kind::Not:
        return negate(run(*f.lhs));
      case Kind::Or:
        return max2(run(*f.lhs), run(*f.rhs));
      case Kind::Next:
        return shift_next(run(*f.lhs));
      case Kind::Yesterday:
        return shift_yesterday(run(*f.lhs));
      case Kind::Until:
        return until(run(*f.lhs), run(*f.rhs), f.interval);
      case Kind::Since:
        return since(run(*f.lhs), run(*f.rhs), f.interval);
      default:
        throw std::logic_error("non-core operator reached the evaluator");
    }
  }
};

}  // namespace

RobustnessMatrix robustness(const std::vector<FormulaPtr>& formulas, const TraceBatch& b) {
  RobustnessMatrix m;
  m.formulas = formulas.size();
  m.traces = b.count;
  m.max_length = b.max_length;
  m.lengths = b.lengths;
  m.values.assign(m.formulas * m.traces * m.max_length, 0.0);
  Eval ev{b};
  for (std::size_t q = 0; q < formulas.size(); ++q) {
    Layer layer = ev.run(*rewrite_to_core(formulas[q]));
    for (std::size_t k = 0; k < b.count; ++k) {
      const double* r = layer.row(k);
      for (std::size_t j = 0; j < b.lengths[k]; ++j) {
        assert(!std::isnan(r[j]));
        m.at(q, k, j) = r[j];
      }
    }
  }
  return m;
}

namespace {

double atom_value(const Atom& a, const Trace& t, std::size_t i) {
  double s = 0;
  for (const auto& term : a.terms) {
    if (term.index < 0 || term.index >= static_cast<int>(t.arity))
      throw std::out_of_range("atom variable index out of range");
    s += term.weight * t.at(i, term.index);
  }
  switch (a.cmp) {
    case Cmp::Ge: return s - a.threshold;
    case Cmp::Lt: return a.threshold - s;   // !(f >= c)
    case Cmp::Le: return a.threshold - s;   // -f >= -c
    case Cmp::Gt: return s - a.threshold;   // !(-f >= -c)
  }
  throw std::logic_error("unreachable");
}

// window [i+lo, min(i+hi, len-1)] for future ops; empty when out of fit
struct Window {
  std::size_t from, to;
  bool fits;
};

Window future_window(std::size_t i, Interval I, std::size_t len) {
  if (I.unbounded()) {
    if (i + I.lo >= len) return {0, 0, false};
    return {i + I.lo, len - 1, true};
  }
  if (i + I.hi >= len) return {0, 0, false};
  return {i + I.lo, i + I.hi, true};
}

Window past_window(std::size_t i, Interval I, std::size_t) {
  if (i < I.lo) return {0, 0, false};
  if (I.unbounded()) return {0, i - I.lo, true};
  if (i < I.hi) return {0, 0, false};
  return {i - I.hi, i - I.lo, true};
}

}  // namespace

double robustness_ref(const Formula& f, const Trace& t, std::size_t i) {
  if (i >= t.length) throw std::out_of_range("position beyond trace length");
  auto r = [&](const Formula& g, std::size_t j) { return robustness_ref(g, t, j); };
  const std::size_t len = t.length;
  switch (f.kind) {
    case Kind::True:
      return kInf;
    case Kind::Atom:
      return atom_value(f.atom, t, i);
    case Kind::Not:
      return -r(*f.lhs, i);
    case Kind::Or:
      return std::max(r(*f.lhs, i), r(*f.rhs, i));
    case Kind::And:
      return std::min(r(*f.lhs, i), r(*f.rhs, i));
    case Kind::Next:
      return i + 1 < len ? r(*f.lhs, i + 1) : -kInf;
    case Kind::WeakNext:
      return i + 1 < len ? r(*f.lhs, i + 1) : kInf;
    case Kind::Yesterday:
      return i > 0 ? r(*f.lhs, i - 1) : -kInf;
    case Kind::WeakYesterday:
      return i > 0 ? r(*f.lhs, i - 1) : kInf;
    case Kind::Until: {
      Window w = future_window(i, f.interval, len);
      if (!w.fits) return -kInf;
      double best = -kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) {
        double m = r(*f.rhs, j);
        for (std::size_t k = i; k < j; ++k) m = std::min(m, r(*f.lhs, k));
        best = std::max(best, m);
      }
      return best;
    }
    case Kind::Release: {  // !(!a U !b)
      Window w = future_window(i, f.interval, len);
      if (!w.fits) return kInf;
      double worst = kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) {
        double m = r(*f.rhs, j);
        for (std::size_t k = i; k < j; ++k) m = std::max(m, r(*f.lhs, k));
        worst = std::min(worst, m);
      }
      return worst;
    }
    case Kind::Eventually: {  // TRUE U_I f
      Window w = future_window(i, f.interval, len);
      if (!w.fits) return -kInf;
      double best = -kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) best = std::max(best, r(*f.lhs, j));
      return best;
    }
    case Kind::Globally: {
      Window w = future_window(i, f.interval, len);
      if (!w.fits) return kInf;
      double worst = kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) worst = std::min(worst, r(*f.lhs, j));
      return worst;
    }
    case Kind::Since: {
      Window w = past_window(i, f.interval, len);
      if (!w.fits) return -kInf;
      double best = -kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) {
        double m = r(*f.rhs, j);
        for (std::size_t k = j + 1; k <= i; ++k) m = std::min(m, r(*f.lhs, k));
        best = std::max(best, m);
      }
      return best;
    }
    case Kind::Triggers: {
      Window w = past_window(i, f.interval, len);
      if (!w.fits) return kInf;
      double worst = kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) {
        double m = r(*f.rhs, j);
        for (std::size_t k = j + 1; k <= i; ++k) m = std::max(m, r(*f.lhs, k));
        worst = std::min(worst, m);
      }
      return worst;
    }
    case Kind::Once: {
      Window w = past_window(i, f.interval, len);
      if (!w.fits) return -kInf;
      double best = -kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) best = std::max(best, r(*f.lhs, j));
      return best;
    }
    case Kind::Historically: {
      Window w = past_window(i, f.interval, len);
      if (!w.fits) return kInf;
      double worst = kInf;
      for (std::size_t j = w.from; j <= w.to; ++j) worst = std::min(worst, r(*f.lhs, j));
      return worst;
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<MonitorTrace> monitor(const FormulaPtr& f, const TraceBatch& b) {
  Fragment frag = fragment_of(*f);
  if (frag != Fragment::SafetyG && frag != Fragment::CosafetyF)
    throw std::invalid_argument("monitor requires a G(pure past) or F(pure past) formula");

  // For G(body) the detector is !body; its firing makes the verdict Bot.
  bool safety = frag == Fragment::SafetyG;
  FormulaPtr detector = safety ? f_not(f->lhs) : f->lhs;
  RobustnessMatrix m = robustness({detector}, b);

  std::vector<MonitorTrace> out(b.count);
  for (std::size_t k = 0; k < b.count; ++k) {
    MonitorTrace& mt = out[k];
    mt.verdicts.resize(b.lengths[k], Verdict::Unknown);
    bool decided = false;
    for (std::size_t j = 0; j < b.lengths[k]; ++j) {
      double rob = m.at(0, k, j);
      // Bot needs rob > 0 (strict); Top needs rob >= 0.
      if (!decided && (safety ? rob > 0 : rob >= 0)) {
        decided = true;
        mt.first_decision = j;
      }
      if (decided) mt.verdicts[j] = safety ? Verdict::Bot : Verdict::Top;
    }
  }
  return out;
}

std::optional<std::size_t> earliest_violation(const std::vector<FormulaPtr>& detectors,
                                              const Trace& t) {
  if (detectors.empty()) return std::nullopt;
  RobustnessMatrix m = robustness(detectors, batch_one(t));
  std::optional<std::size_t> best;
  for (std::size_t q = 0; q < detectors.size(); ++q)
    for (std::size_t j = 0; j < t.length; ++j)
      if (m.at(q, 0, j) > 0) {
        if (!best || j < *best) best = j;
        break;
      }
  return best;
}

bool trace_check(const FormulaPtr& f, const Trace& t) {
  std::size_t pos = fragment_of(*f) == Fragment::PurePast ? t.length - 1 : 0;
  RobustnessMatrix m = robustness({f}, batch_one(t));
  return m.at(0, 0, pos) >= 0;
}

}  // namespace stlmon
