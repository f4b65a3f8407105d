#pragma once

#include <cstdint>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/kernel.hpp"
#include "dcm/subset.hpp"

namespace dcm {

/// Determinants at or below this value are zero-probability events.
inline constexpr double kDetFloor = 1e-300;
/// Negative determinants with |det| <= kNegativeDetTol * prod max(1, M_ii) are rounding noise.
inline constexpr double kNegativeDetTol = 1e-10;
inline constexpr int kDefaultEnumerationCap = 15;

/// log det(M_C) by LU with partial pivoting. 0 for the empty subset, -inf for
/// singular (det <= kDetFloor) submatrices. Throws NumericalError for a
/// clearly negative determinant.
double log_det_submatrix(const Matrix& M, const SubsetIndex& C);

/// log det(M) of a square matrix, same conventions as log_det_submatrix.
double log_det_lu(const Matrix& M);

/// log det(I + L) by Cholesky. Throws NumericalError with diagnostics on failure.
double log_normalizer(const Matrix& L);

/// log det(L_C) - log det(I + L).
double subset_log_likelihood(const KernelBundle& bundle, const SubsetIndex& C);
/// sum_{i in C} 2 log q_i + log det(S_C) - log det(I + L).
double subset_log_likelihood_factored(const KernelBundle& bundle, const SubsetIndex& C);

/// Exact probabilities of all 2^n subsets, indexed by bitmask.
struct Pmf {
  int n = 0;
  std::vector<double> prob;  // prob[mask]
  double normalizer = 0.0;   // sum over subsets of det(L_B)

  double operator[](const SubsetIndex& C) const { return prob[C.mask()]; }
};

/// Brute-force enumeration oracle. Throws CapacityError for n > cap.
Pmf enumerate_pmf(const Matrix& L, int cap = kDefaultEnumerationCap);

/// Total variation distance between an empirical histogram over masks and a pmf.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// The subset utility implied by the kernel, split into item and interaction parts.
struct UtilityDecomposition {
  double total = 0.0;          // log det(L_C)
  double additive_part = 0.0;  // sum_{i in C} 2 log q_i
  double correction = 0.0;     // log det(S_C), <= 0 for unit-diagonal PSD S
};

UtilityDecomposition implied_utility(const KernelBundle& bundle, const SubsetIndex& C);

/// Independent Gaussian priors on beta and on log lengthscales.
struct PriorSpec {
  Vector beta_mean;
  Vector beta_sd;
  Vector loglen_mean;
  Vector loglen_sd;

  /// beta ~ N(0, 2^2), log l ~ N(0, 1).
  static PriorSpec defaults(int n_quality, int n_groups);
  static PriorSpec defaults(const KernelLayout& layout) {
    return defaults(layout.n_quality(), layout.n_groups());
  }
  void validate(const KernelLayout& layout) const;
  double log_density(const ModelParams& params) const;
  /// Gradient of log_density in (beta, log l).
  Vector log_density_gradient(const ModelParams& params) const;
};

double observation_log_likelihood(const ModelParams& params, const Observation& obs,
                                  const SimilarityMode& mode = similarity::Rbf{});

/// Sum of observation log-likelihoods plus the log prior; -inf if any
/// observation has zero likelihood.
double dataset_log_posterior(const ModelParams& params, const Dataset& data,
                             const PriorSpec& priors,
                             const SimilarityMode& mode = similarity::Rbf{});

enum class LengthscaleGradient { FiniteDifference, Analytic };

struct GradientOptions {
  LengthscaleGradient lengthscales = LengthscaleGradient::FiniteDifference;
  double fd_step = 1e-5;  // relative: h = fd_step * max(1, |theta|)
};

/// Gradient of dataset_log_posterior in (beta, log l). The beta block is
/// analytic: sum_{i in C} x_i - sum_{i in A} K_ii x_i with K = L (I + L)^-1.
/// Throws DomainError where the log-posterior is -inf.
Vector grad_log_posterior(const ModelParams& params, const Dataset& data,
                          const PriorSpec& priors, const GradientOptions& opts = {},
                          const SimilarityMode& mode = similarity::Rbf{});

}  // namespace dcm
