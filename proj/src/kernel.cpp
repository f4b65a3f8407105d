#include "dcm/kernel.hpp"

#include <cmath>
#include <set>

#include "dcm/errors.hpp"

namespace dcm {

KernelLayout KernelLayout::all_features(int d) {
  KernelLayout out;
  for (int k = 0; k < d; ++k) {
    out.quality_features.push_back(k);
    out.similarity_features.push_back(k);
    out.similarity_groups.push_back(k);
  }
  return out;
}

int KernelLayout::n_groups() const {
  int g = 0;
  for (int v : similarity_groups) g = std::max(g, v + 1);
  return g;
}

void KernelLayout::validate(int d) const {
  auto check_cols = [d](const std::vector<int>& cols, const char* what) {
    std::set<int> seen;
    for (int c : cols) {
      if (c < 0 || c >= d)
        throw ArgumentError(std::string(what) + " column " + std::to_string(c) +
                            " out of range for " + std::to_string(d) + " features");
      if (!seen.insert(c).second)
        throw ArgumentError(std::string(what) + " column " + std::to_string(c) + " repeated");
    }
  };
  check_cols(quality_features, "quality");
  check_cols(similarity_features, "similarity");
  if (similarity_groups.size() != similarity_features.size())
    throw ArgumentError("similarity_groups must parallel similarity_features");
  std::vector<bool> used(n_groups(), false);
  for (int g : similarity_groups) {
    if (g < 0) throw ArgumentError("negative similarity group");
    used[g] = true;
  }
  for (std::size_t g = 0; g < used.size(); ++g)
    if (!used[g]) throw ArgumentError("similarity group " + std::to_string(g) + " is empty");
}

Vector ModelParams::feature_lengthscales() const {
  Vector out(layout.similarity_features.size());
  for (std::size_t k = 0; k < layout.similarity_features.size(); ++k)
    out[k] = std::exp(log_lengthscales[layout.similarity_groups[k]]);
  return out;
}

Vector ModelParams::packed() const {
  Vector theta(dim());
  theta << beta, log_lengthscales;
  return theta;
}

ModelParams ModelParams::unpack(const Vector& theta, const KernelLayout& layout) {
  const int dq = layout.n_quality();
  const int dg = layout.n_groups();
  if (theta.size() != dq + dg)
    throw ArgumentError("parameter vector has size " + std::to_string(theta.size()) +
                        ", expected " + std::to_string(dq + dg));
  return ModelParams{theta.head(dq), theta.tail(dg), layout};
}

void ModelParams::validate() const {
  if (beta.size() != layout.n_quality())
    throw ArgumentError("beta size does not match the quality features");
  if (log_lengthscales.size() != layout.n_groups())
    throw ArgumentError("log_lengthscales size does not match the similarity groups");
  if (!beta.allFinite() || !log_lengthscales.allFinite())
    throw ArgumentError("model parameters must be finite");
}

void Assortment::validate() const {
  if (features.rows() < 1) throw ArgumentError("assortment must contain at least one item");
  if (!features.allFinite()) throw ArgumentError("assortment features must be finite");
  if (!ids.empty()) {
    if (ids.size() != static_cast<std::size_t>(features.rows()))
      throw ArgumentError("assortment ids and feature rows differ in count");
    std::set<std::string> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) throw ArgumentError("assortment item ids are not unique");
  }
}

double quality(const Vector& beta, const Vector& x) {
  if (beta.size() != x.size())
    throw ArgumentError("quality: beta has " + std::to_string(beta.size()) +
                        " entries, features have " + std::to_string(x.size()));
  return std::exp(0.5 * beta.dot(x));
}

double rbf_similarity(const Vector& lengthscales, const Vector& xi, const Vector& xj) {
  if (lengthscales.size() != xi.size() || xi.size() != xj.size())
    throw ArgumentError("rbf_similarity: dimension mismatch");
  if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite())
    throw ArgumentError("rbf_similarity: lengthscales must be positive and finite");
  return std::exp(-0.5 * ((xi - xj).array() / lengthscales.array()).square().sum());
}

Matrix rbf_similarity_matrix(const Matrix& features, const Vector& lengthscales) {
  if (lengthscales.size() != features.cols())
    throw ArgumentError("rbf_similarity_matrix: dimension mismatch");
  if ((lengthscales.array() <= 0.0).any())
    throw ArgumentError("rbf_similarity_matrix: lengthscales must be positive");
  const Eigen::Index n = features.rows();
  const Matrix scaled = features * lengthscales.cwiseInverse().asDiagonal();
  Matrix S(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-0.5 * (scaled.row(i) - scaled.row(j)).squaredNorm());
      S(i, j) = v;
      S(j, i) = v;
    }
  }
  return S;
}

Matrix select_columns(const Matrix& features, const std::vector<int>& cols) {
  Matrix out(features.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = features.col(cols[k]);
  return out;
}

Matrix quality_features(const Assortment& a, const KernelLayout& layout) {
  return select_columns(a.features, layout.quality_features);
}

namespace {

struct SimilarityBuilder {
  const ModelParams& params;
  const Assortment& a;

  Matrix operator()(const similarity::Rbf& rbf) const {
    Matrix S = rbf_similarity_matrix(select_columns(a.features, params.layout.similarity_features),
                                     params.feature_lengthscales());
    if (rbf.jitter > 0.0) {
      S.diagonal().array() += rbf.jitter;
      S /= 1.0 + rbf.jitter;
    }
    return S;
  }
  Matrix operator()(const similarity::Identity&) const {
    return Matrix::Identity(a.size(), a.size());
  }
  Matrix operator()(const similarity::AllOnes&) const {
    return Matrix::Ones(a.size(), a.size());
  }
  Matrix operator()(const similarity::Fixed& fixed) const {
    validate_similarity(fixed.S, a.size());
    return fixed.S;
  }
};

}  // namespace

KernelBundle build_kernel(const ModelParams& params, const Assortment& a,
                          const SimilarityMode& mode) {
  if (a.dim() <= 0 && a.size() > 0) throw ArgumentError("assortment has no features");
  const Matrix Xq = quality_features(a, params.layout);
  if (Xq.cols() != params.beta.size())
    throw ArgumentError("build_kernel: beta does not match quality features");
  KernelBundle b;
  b.q = (0.5 * (Xq * params.beta)).array().exp();
  b.S = std::visit(SimilarityBuilder{params, a}, mode);
  b.L = b.q.asDiagonal() * b.S * b.q.asDiagonal();
  return b;
}

bool psd_check(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) throw ArgumentError("psd_check: matrix is not square");
  if (M.size() == 0) return true;
  if (!M.allFinite()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return false;
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, norm);
}

void validate_similarity(const Matrix& S, int n, double tol) {
  if (S.rows() != n || S.cols() != n)
    throw ValidationError("similarity matrix must be " + std::to_string(n) + "x" +
                          std::to_string(n));
  if ((S.diagonal().array() - 1.0).abs().maxCoeff() > tol)
    throw ValidationError("similarity matrix must have a unit diagonal");
  if (S.minCoeff() < -tol || S.maxCoeff() > 1.0 + tol)
    throw ValidationError("similarity entries must lie in [0, 1]");
  if (!psd_check(S, tol)) throw ValidationError("similarity matrix is not positive semi-definite");
}

}  // namespace dcm
