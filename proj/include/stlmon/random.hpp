#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stlmon {

/// Seeded random source. Distributions are implemented locally so draws are
/// reproducible regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return lo + bits() % (hi - lo + 1);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; one spare kept between calls.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  /// Child generator with a decorrelated stream, for per-partition work.
  Rng derive(std::uint64_t salt) {
    std::uint64_t s = eng_() ^ (salt * 0x9E3779B97F4A7C15ull);
    return Rng(s);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace stlmon
