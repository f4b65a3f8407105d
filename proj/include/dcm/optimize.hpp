#pragma once

#include <functional>

#include "dcm/kernel.hpp"
#include "dcm/likelihood.hpp"

namespace dcm {

struct OptConfig {
  int max_iterations = 2000;
  /// Converged when ||grad||_inf <= min(grad_tol * max(1, |f|), grad_tol_abs).
  double grad_tol = 1e-6;
  double grad_tol_abs = 1e-5;
  GradientOptions gradient;
};

struct OptimizeResult {
  Vector x;
  double value = 0.0;
  Vector grad;
  int iterations = 0;
  bool converged = false;
  Matrix inv_hessian;  // BFGS approximation of (-Hessian)^-1 at x
};

/// Quasi-Newton (BFGS) ascent with Armijo backtracking. Non-finite objective
/// values are rejected by the line search; gradient evaluations that throw
/// DomainError count as rejected steps.
OptimizeResult maximize_bfgs(const std::function<double(const Vector&)>& objective,
                             const std::function<Vector(const Vector&)>& gradient, Vector x0,
                             const OptConfig& config);

}  // namespace dcm
