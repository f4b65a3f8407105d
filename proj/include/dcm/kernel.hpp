#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dcm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Which feature columns feed the quality and similarity models.
///
/// Similarity features are partitioned into lengthscale groups: every feature
/// in a group shares one lengthscale. A channel one-hot block, for instance,
/// is one group. By default each similarity feature is its own group.
struct KernelLayout {
  std::vector<int> quality_features;
  std::vector<int> similarity_features;
  std::vector<int> similarity_groups;  // parallel to similarity_features

  /// Quality and similarity over all d features, one lengthscale each.
  static KernelLayout all_features(int d);

  int n_quality() const { return static_cast<int>(quality_features.size()); }
  int n_groups() const;
  /// Throws ArgumentError on out-of-range columns or non-contiguous groups.
  void validate(int d) const;

  friend bool operator==(const KernelLayout&, const KernelLayout&) = default;
};

struct ModelParams {
  Vector beta;              // one per quality feature
  Vector log_lengthscales;  // one per similarity group
  KernelLayout layout;

  int dim() const { return static_cast<int>(beta.size() + log_lengthscales.size()); }
  /// Per-similarity-feature lengthscales, expanded from the groups.
  Vector feature_lengthscales() const;
  /// [beta; log_lengthscales]
  Vector packed() const;
  static ModelParams unpack(const Vector& theta, const KernelLayout& layout);
  void validate() const;
};

/// Items offered together: one row of `features` per item.
struct Assortment {
  Matrix features;
  std::vector<std::string> ids;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  /// Throws ArgumentError on empty assortments, non-finite entries or id clashes.
  void validate() const;
};

struct KernelBundle {
  Vector q;
  Matrix S;
  Matrix L;
};

namespace similarity {
/// Anisotropic RBF over the layout's similarity features. A positive jitter
/// blends toward the identity, S <- (S + jitter I) / (1 + jitter).
struct Rbf {
  double jitter = 0.0;
};
struct Identity {};
struct AllOnes {};
struct Fixed {
  Matrix S;
};
}  // namespace similarity

using SimilarityMode =
    std::variant<similarity::Rbf, similarity::Identity, similarity::AllOnes, similarity::Fixed>;

/// exp(beta . x / 2)
double quality(const Vector& beta, const Vector& x);

/// exp(-1/2 sum_k (x_ik - x_jk)^2 / l_k^2)
double rbf_similarity(const Vector& lengthscales, const Vector& xi, const Vector& xj);

/// Gram matrix of rbf_similarity over the rows of `features`.
Matrix rbf_similarity_matrix(const Matrix& features, const Vector& lengthscales);

/// Columns `cols` of `features`.
Matrix select_columns(const Matrix& features, const std::vector<int>& cols);

Matrix quality_features(const Assortment& a, const KernelLayout& layout);

KernelBundle build_kernel(const ModelParams& params, const Assortment& a,
                          const SimilarityMode& mode = similarity::Rbf{});

/// Symmetric within tol and smallest eigenvalue >= -tol * max(1, ||M||_2).
bool psd_check(const Matrix& M, double tol = 1e-10);

/// Throws ValidationError unless S is square n x n, PSD, unit-diagonal, with entries in [0, 1].
void validate_similarity(const Matrix& S, int n, double tol = 1e-10);

}  // namespace dcm
