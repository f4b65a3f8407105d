#include "dcm/optimize.hpp"

#include <cmath>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

double tolerance(const OptConfig& c, double f) {
  return std::min(c.grad_tol * std::max(1.0, std::abs(f)), c.grad_tol_abs);
}

}  // namespace

OptimizeResult maximize_bfgs(const std::function<double(const Vector&)>& objective,
                             const std::function<Vector(const Vector&)>& gradient, Vector x0,
                             const OptConfig& config) {
  const Eigen::Index n = x0.size();
  OptimizeResult r;
  r.x = std::move(x0);
  r.value = objective(r.x);
  if (!std::isfinite(r.value)) throw DomainError("maximize_bfgs: objective is not finite at the start");
  r.grad = gradient(r.x);
  Matrix H = Matrix::Identity(n, n);
  bool fresh = true;  // H has not been updated since the last reset
  int stalled = 0;

  for (r.iterations = 0; r.iterations < config.max_iterations; ++r.iterations) {
    if (r.grad.lpNorm<Eigen::Infinity>() <= tolerance(config, r.value)) {
      r.converged = true;
      break;
    }
    Vector dir = H * r.grad;
    double slope = dir.dot(r.grad);
    if (!(slope > 0.0)) {
      H.setIdentity();
      fresh = true;
      dir = r.grad;
      slope = dir.dot(r.grad);
    }
    double step = 1.0;
    if (fresh) step = std::min(1.0, 1.0 / std::max(1e-300, r.grad.lpNorm<Eigen::Infinity>()));

    bool accepted = false;
    Vector x_new, g_new;
    double f_new = 0.0;
    // Armijo, or near the optimum where f no longer resolves the decrease,
    // an approximate-Wolfe step: f within roundoff and the slope shrinking.
    const double f_noise = 1e-10 * std::max(1.0, std::abs(r.value));
    for (int tries = 0; tries < 60; ++tries, step *= 0.5) {
      x_new = r.x + step * dir;
      if (x_new == r.x) break;
      f_new = objective(x_new);
      if (!std::isfinite(f_new)) continue;
      const bool armijo = f_new >= r.value + 1e-4 * step * slope;
      if (!armijo && f_new < r.value - f_noise) continue;
      try {
        g_new = gradient(x_new);
      } catch (const DomainError&) {
        continue;
      }
      if (!armijo && std::abs(g_new.dot(dir)) > 0.9 * slope) continue;
      accepted = true;
      break;
    }
    if (!accepted) {
      if (fresh) break;  // no progress even along the gradient
      H.setIdentity();
      fresh = true;
      continue;
    }

    const Vector s = x_new - r.x;
    const Vector y = r.grad - g_new;  // gradient of the negated objective
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) H = Matrix::Identity(n, n) * (sy / y.squaredNorm());
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
      fresh = false;
    }
    const bool progress = f_new > r.value ||
                          g_new.lpNorm<Eigen::Infinity>() < r.grad.lpNorm<Eigen::Infinity>();
    stalled = progress ? 0 : stalled + 1;
    r.x = std::move(x_new);
    r.value = f_new;
    r.grad = std::move(g_new);
    if (stalled >= 10) break;
  }
  if (!r.converged && r.grad.lpNorm<Eigen::Infinity>() <= tolerance(config, r.value))
    r.converged = true;
  r.inv_hessian = H;
  return r;
}

}  // namespace dcm
