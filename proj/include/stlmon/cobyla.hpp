#pragma once

#include <functional>
#include <vector>

namespace stlmon {

/// Derivative-free constrained minimizer in the COBYLA mold: linear models of
/// objective and constraints are rebuilt from nearby samples and a trust-region
/// step is taken against a penalized merit. Constraints are c_i(x) >= 0.
struct OptimizeResult {
  std::vector<double> x;
  double objective;
  std::size_t evaluations;
};

OptimizeResult minimize_linear_approx(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::function<double(const std::vector<double>&)>& constraint,
    std::vector<double> x0, double rho_start, double rho_end, std::size_t max_evals);

}  // namespace stlmon
