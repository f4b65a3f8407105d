#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcm/kernel.hpp"

namespace dcm {

/// A MAP estimate and how it was obtained.
struct FitResult {
  std::string model;  // "determinantal", "logistic" or "mnl"
  ModelParams params;
  double log_posterior = 0.0;
  double grad_norm = 0.0;  // infinity norm
  int iterations = 0;
  bool converged = false;
  /// Approximate posterior covariance at the estimate (inverse negative Hessian).
  Matrix covariance;
  /// Settings that produced the fit, as key/value strings.
  std::vector<std::pair<std::string, std::string>> provenance;
};

}  // namespace dcm
