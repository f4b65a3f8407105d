#pragma once

#include <vector>

#include "dcm/kernel.hpp"
#include "dcm/likelihood.hpp"
#include "dcm/rng.hpp"
#include "dcm/subset.hpp"

namespace dcm {

/// Exact DPP sampler from the eigendecomposition of L.
///
/// Each eigenvector k enters the elementary DPP with probability
/// lambda_k / (1 + lambda_k); items are then drawn one at a time from the
/// projection DPP spanned by the selected eigenvectors. Eigenvalues below
/// 1e-12 * lambda_max count as zero, so rank-deficient kernels are fine.
class SpectralSampler {
 public:
  explicit SpectralSampler(const Matrix& L);

  SubsetIndex operator()(Rng& rng) const;

  const Vector& eigenvalues() const { return lambda_; }
  /// Marginal inclusion probabilities K_ii with K = L (I + L)^-1.
  Vector inclusion_probabilities() const;

 private:
  Vector lambda_;
  Matrix vectors_;
};

/// Inverse-CDF draw over the enumerated pmf.
class EnumerationSampler {
 public:
  explicit EnumerationSampler(const Matrix& L, int cap = kDefaultEnumerationCap);
  SubsetIndex operator()(Rng& rng) const;
  const Pmf& pmf() const { return pmf_; }

 private:
  Pmf pmf_;
  std::vector<double> cdf_;
};

/// Random-utility sampler: every subset C gets utility log det(L_C) plus an
/// iid standard Gumbel error and the argmax is returned. Subsets with
/// log det = -inf never win.
class GumbelRumSampler {
 public:
  explicit GumbelRumSampler(const Matrix& L, int cap = kDefaultEnumerationCap);
  SubsetIndex operator()(Rng& rng) const;

 private:
  int n_;
  std::vector<std::uint64_t> masks_;
  std::vector<double> utilities_;
};

SubsetIndex spectral_sample(const Matrix& L, Rng& rng);
SubsetIndex enumeration_sample(const Matrix& L, Rng& rng, int cap = kDefaultEnumerationCap);
SubsetIndex gumbel_rum_sample(const Matrix& L, Rng& rng, int cap = kDefaultEnumerationCap);

/// Index drawn with probability proportional to `weights`.
std::size_t sample_categorical(const Vector& weights, Rng& rng);

}  // namespace dcm
