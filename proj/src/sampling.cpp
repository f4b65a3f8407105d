#include "dcm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcm/errors.hpp"

namespace dcm {

std::size_t sample_categorical(const Vector& weights, Rng& rng) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw ArgumentError("sample_categorical: weights sum to zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<std::size_t>(k);
  }
  // Rounding: fall back to the last positive weight.
  for (Eigen::Index k = weights.size() - 1; k >= 0; --k)
    if (weights[k] > 0.0) return static_cast<std::size_t>(k);
  return static_cast<std::size_t>(weights.size() - 1);
}

SpectralSampler::SpectralSampler(const Matrix& L) {
  if (L.rows() != L.cols()) throw ArgumentError("spectral sampler: matrix is not square");
  if (L.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (L + L.transpose()));
  if (es.info() != Eigen::Success || !es.eigenvalues().allFinite())
    throw NumericalError("spectral sampler: eigendecomposition failed");
  lambda_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
  const double lmax = std::max(0.0, lambda_.maxCoeff());
  for (Eigen::Index k = 0; k < lambda_.size(); ++k)
    if (lambda_[k] <= 1e-12 * lmax) lambda_[k] = 0.0;
}

Vector SpectralSampler::inclusion_probabilities() const {
  const Vector w = lambda_.array() / (1.0 + lambda_.array());
  return vectors_.array().square().matrix() * w;
}

SubsetIndex SpectralSampler::operator()(Rng& rng) const {
  const Eigen::Index n = lambda_.size();
  std::vector<Eigen::Index> chosen_vecs;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u = rng.uniform();
    if (u < lambda_[k] / (1.0 + lambda_[k])) chosen_vecs.push_back(k);
  }
  Matrix V(n, static_cast<Eigen::Index>(chosen_vecs.size()));
  for (std::size_t c = 0; c < chosen_vecs.size(); ++c) V.col(c) = vectors_.col(chosen_vecs[c]);

  std::vector<int> items;
  while (V.cols() > 0) {
    const Vector weights = V.rowwise().squaredNorm();
    const auto i = static_cast<Eigen::Index>(sample_categorical(weights, rng));
    items.push_back(static_cast<int>(i));

    // Eliminate row i using the column with the largest entry there, then
    // re-orthonormalize the remaining basis.
    Eigen::Index j;
    V.row(i).cwiseAbs().maxCoeff(&j);
    const Vector vj = V.col(j);
    const double pivot = vj[i];
    Matrix rest(n, V.cols() - 1);
    for (Eigen::Index c = 0, r = 0; c < V.cols(); ++c) {
      if (c == j) continue;
      rest.col(r++) = V.col(c) - vj * (V(i, c) / pivot);
    }
    for (Eigen::Index c = 0; c < rest.cols(); ++c) {
      for (Eigen::Index p = 0; p < c; ++p) rest.col(c) -= rest.col(p).dot(rest.col(c)) * rest.col(p);
      const double norm = rest.col(c).norm();
      if (norm > 0.0) rest.col(c) /= norm;
    }
    V = std::move(rest);
  }
  return SubsetIndex(std::move(items));
}

EnumerationSampler::EnumerationSampler(const Matrix& L, int cap) : pmf_(enumerate_pmf(L, cap)) {
  cdf_.resize(pmf_.prob.size());
  double acc = 0.0;
  for (std::size_t m = 0; m < pmf_.prob.size(); ++m) {
    acc += pmf_.prob[m];
    cdf_[m] = acc;
  }
}

SubsetIndex EnumerationSampler::operator()(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t m = static_cast<std::size_t>(it - cdf_.begin());
  if (m >= cdf_.size()) m = cdf_.size() - 1;
  // Skip zero-probability masks that share a cdf value with their successor.
  while (pmf_.prob[m] == 0.0 && m + 1 < cdf_.size()) ++m;
  return SubsetIndex::from_mask(m, pmf_.n);
}

GumbelRumSampler::GumbelRumSampler(const Matrix& L, int cap) {
  if (L.rows() != L.cols()) throw ArgumentError("gumbel sampler: matrix is not square");
  n_ = static_cast<int>(L.rows());
  if (n_ > cap || n_ > 30)
    throw CapacityError("gumbel sampler: " + std::to_string(n_) + " items exceeds cap " +
                        std::to_string(cap));
  const std::uint64_t count = std::uint64_t{1} << n_;
  for (std::uint64_t m = 0; m < count; ++m) {
    const double u = log_det_submatrix(L, SubsetIndex::from_mask(m, n_));
    if (u == -std::numeric_limits<double>::infinity()) continue;
    masks_.push_back(m);
    utilities_.push_back(u);
  }
}

SubsetIndex GumbelRumSampler::operator()(Rng& rng) const {
  std::size_t best = 0;
  double best_u = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < utilities_.size(); ++k) {
    const double u = utilities_[k] + rng.gumbel();
    if (u > best_u) {
      best_u = u;
      best = k;
    }
  }
  return SubsetIndex::from_mask(masks_[best], n_);
}

SubsetIndex spectral_sample(const Matrix& L, Rng& rng) { return SpectralSampler(L)(rng); }

SubsetIndex enumeration_sample(const Matrix& L, Rng& rng, int cap) {
  return EnumerationSampler(L, cap)(rng);
}

SubsetIndex gumbel_rum_sample(const Matrix& L, Rng& rng, int cap) {
  return GumbelRumSampler(L, cap)(rng);
}

}  // namespace dcm
