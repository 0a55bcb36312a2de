#include "stlmon/sampler.hpp"

#include <algorithm>

namespace stlmon {

namespace {

constexpr std::size_t kHardCap = 17;

Interval sample_interval(Rng& rng, const GenConfig& cfg) {
  Interval i;
  if (rng.bernoulli(cfg.p_unbounded)) return i;  // [0, inf)
  std::uint32_t cap = std::max<std::uint32_t>(cfg.interval_cap, 1);
  std::uint32_t a = static_cast<std::uint32_t>(rng.uniform_int(0, cap));
  if (rng.bernoulli(0.25)) {
    i.lo = a;  // [a, inf)
    return i;
  }
  std::uint32_t b = static_cast<std::uint32_t>(rng.uniform_int(0, cap));
  i.lo = std::min(a, b);
  i.hi = std::max(a, b);
  return i;
}

// Past/boolean internals only; weights chosen so temporal structure is common.
enum class Internal { Not, And, Or, Yesterday, WeakYesterday, Once, Historically, Since, Triggers };

Internal sample_internal(Rng& rng) {
  static const Internal choices[] = {
      Internal::Not, Internal::And, Internal::Or, Internal::Yesterday,
      Internal::WeakYesterday, Internal::Once, Internal::Historically,
      Internal::Since, Internal::Triggers};
  return choices[rng.uniform_int(0, std::size(choices) - 1)];
}

FormulaPtr grow(Rng& rng, const GenConfig& cfg, std::size_t budget, std::size_t min_h) {
  if (budget <= 1 || (min_h <= 1 && rng.bernoulli(0.3))) return sample_atom(rng, cfg);
  std::size_t cb = budget - 1;
  std::size_t cm = min_h > 1 ? min_h - 1 : 0;
  switch (sample_internal(rng)) {
    case Internal::Not: return f_not(grow(rng, cfg, cb, cm));
    case Internal::And: return f_and(grow(rng, cfg, cb, cm), grow(rng, cfg, cb, 0));
    case Internal::Or: return f_or(grow(rng, cfg, cb, cm), grow(rng, cfg, cb, 0));
    case Internal::Yesterday: return f_unary(Kind::Yesterday, grow(rng, cfg, cb, cm));
    case Internal::WeakYesterday: return f_unary(Kind::WeakYesterday, grow(rng, cfg, cb, cm));
    case Internal::Once:
      return f_unary(Kind::Once, grow(rng, cfg, cb, cm), sample_interval(rng, cfg));
    case Internal::Historically:
      return f_unary(Kind::Historically, grow(rng, cfg, cb, cm), sample_interval(rng, cfg));
    case Internal::Since:
      return f_binary(Kind::Since, grow(rng, cfg, cb, cm), grow(rng, cfg, cb, 0),
                      sample_interval(rng, cfg));
    case Internal::Triggers:
      return f_binary(Kind::Triggers, grow(rng, cfg, cb, cm), grow(rng, cfg, cb, 0),
                      sample_interval(rng, cfg));
  }
  throw std::logic_error("unreachable");
}

}  // namespace

FormulaPtr sample_atom(Rng& rng, const GenConfig& cfg) {
  std::size_t n = cfg.variables.size();
  if (n == 0) throw std::invalid_argument("sample_atom: no variables configured");
  Atom a;
  std::size_t i = rng.uniform_int(0, n - 1);
  a.terms.push_back({cfg.variables[i], static_cast<int>(i), 1.0});
  if (cfg.multisignal && n > 1 && rng.bernoulli(0.3)) {
    std::size_t j = rng.uniform_int(0, n - 2);
    if (j >= i) ++j;
    a.terms.push_back({cfg.variables[j], static_cast<int>(j), -1.0});
  }
  a.cmp = Cmp::Ge;
  a.threshold = rng.uniform();
  return f_atom(std::move(a));
}

FormulaPtr sample_ppstl(Rng& rng, const GenConfig& cfg) {
  std::size_t hi = std::min(cfg.max_height, kHardCap);
  std::size_t lo = std::min(std::max<std::size_t>(cfg.min_height, 1), hi);
  std::size_t target = lo + rng.uniform_int(0, hi - lo);
  // The deepest spine is driven to exactly `target`, so the height lands in range.
  return grow(rng, cfg, target, target);
}

}  // namespace stlmon
