#include "stlmon/cobyla.hpp"

#include <algorithm>
#include <cmath>

namespace stlmon {

namespace {

constexpr double kPenalty = 10.0;

double merit(double f, double c) { return f + kPenalty * std::max(0.0, -c); }

}  // namespace

OptimizeResult minimize_linear_approx(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::function<double(const std::vector<double>&)>& constraint,
    std::vector<double> x0, double rho_start, double rho_end, std::size_t max_evals) {
  const std::size_t n = x0.size();
  std::size_t evals = 0;
  auto f_of = [&](const std::vector<double>& x) {
    ++evals;
    return objective(x);
  };

  double f_best = f_of(x0);
  double c_best = constraint(x0);
  OptimizeResult res{x0, f_best, evals};
  if (n == 0) return res;

  std::vector<double> x = x0;
  double rho = rho_start;
  while (rho > rho_end && evals + n + 1 <= max_evals) {
    // one-sided differences at step rho give the linear models
    std::vector<double> gf(n), gc(n);
    for (std::size_t d = 0; d < n; ++d) {
      std::vector<double> xp = x;
      xp[d] += rho;
      double fp = f_of(xp);
      double cp = constraint(xp);
      gf[d] = (fp - f_best) / rho;
      gc[d] = (cp - c_best) / rho;
      if (merit(fp, cp) < merit(f_best, c_best)) {
        f_best = fp;
        c_best = cp;
        x = xp;  // keep probe points that already improve
      }
    }
    // steepest descent of the merit model, clipped to the trust radius
    std::vector<double> g(n);
    for (std::size_t d = 0; d < n; ++d)
      g[d] = gf[d] + (c_best < 0 ? -kPenalty * gc[d] : 0.0);
    double norm = 0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      rho *= 0.5;
      continue;
    }
    std::vector<double> xt(n);
    for (std::size_t d = 0; d < n; ++d) xt[d] = x[d] - rho * g[d] / norm;
    double ft = f_of(xt);
    double ct = constraint(xt);
    if (merit(ft, ct) < merit(f_best, c_best)) {
      f_best = ft;
      c_best = ct;
      x = std::move(xt);
    } else {
      rho *= 0.5;
    }
  }

  // better-of-two against the starting point, judged by the merit
  double c0 = constraint(res.x);
  if (merit(f_best, c_best) < merit(res.objective, c0)) {
    res.x = x;
    res.objective = f_best;
  }
  res.evaluations = evals;
  return res;
}

}  // namespace stlmon
