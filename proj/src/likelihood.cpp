#include "dcm/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SignedLogDet {
  int sign = 1;  // 0 when a pivot is exactly zero
  double log_abs = 0.0;
};

// In-place LU with partial pivoting; only the determinant is kept.
SignedLogDet lu_log_det(Matrix a) {
  const Eigen::Index n = a.rows();
  SignedLogDet out;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p;
    const double pivot_abs = a.col(k).tail(n - k).cwiseAbs().maxCoeff(&p);
    p += k;
    if (pivot_abs == 0.0) return {0, kNegInf};
    if (p != k) {
      a.row(k).swap(a.row(p));
      out.sign = -out.sign;
    }
    const double pivot = a(k, k);
    if (pivot < 0) out.sign = -out.sign;
    out.log_abs += std::log(std::abs(pivot));
    if (k + 1 < n) {
      a.col(k).tail(n - k - 1) /= pivot;
      a.bottomRightCorner(n - k - 1, n - k - 1).noalias() -=
          a.col(k).tail(n - k - 1) * a.row(k).tail(n - k - 1);
    }
  }
  return out;
}

double diag_scale_log(const Matrix& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += std::log(std::max(1.0, m(i, i)));
  return s;
}

Matrix submatrix(const Matrix& M, const SubsetIndex& C) {
  return M(C.indices(), C.indices());
}

}  // namespace

double log_det_lu(const Matrix& M) {
  if (M.rows() != M.cols()) throw ArgumentError("log_det: matrix is not square");
  if (M.rows() == 0) return 0.0;
  // Symmetric diagonal scaling to a unit diagonal before factorizing.
  SignedLogDet d;
  const Vector diag = M.diagonal();
  if ((diag.array() > 0).all() && diag.allFinite()) {
    const Vector inv_sqrt = diag.array().rsqrt();
    d = lu_log_det(inv_sqrt.asDiagonal() * M * inv_sqrt.asDiagonal());
    if (d.sign != 0) d.log_abs += diag.array().log().sum();
  } else {
    d = lu_log_det(M);
  }
  if (d.sign == 0) return kNegInf;
  if (d.sign < 0) {
    if (d.log_abs <= std::log(kNegativeDetTol) + diag_scale_log(M)) return kNegInf;
    std::ostringstream msg;
    msg << "negative determinant (log|det| = " << d.log_abs << ") of a " << M.rows() << "x"
        << M.cols() << " submatrix; kernel is not positive semi-definite";
    throw NumericalError(msg.str());
  }
  if (d.log_abs <= std::log(kDetFloor)) return kNegInf;
  return d.log_abs;
}

double log_det_submatrix(const Matrix& M, const SubsetIndex& C) {
  if (M.rows() != M.cols()) throw ArgumentError("log_det_submatrix: matrix is not square");
  C.validate(static_cast<int>(M.rows()));
  if (C.empty()) return 0.0;
  return log_det_lu(submatrix(M, C));
}

double log_normalizer(const Matrix& L) {
  if (L.rows() != L.cols()) throw ArgumentError("log_normalizer: matrix is not square");
  const Eigen::Index n = L.rows();
  Matrix IL = L;
  IL.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(IL);
  if (llt.info() != Eigen::Success || !L.allFinite()) {
    std::ostringstream msg;
    msg << "Cholesky of I + L failed (n = " << n;
    if (n > 0) {
      msg << ", min diag = " << L.diagonal().minCoeff() << ", max |L_ij| = "
          << L.cwiseAbs().maxCoeff()
          << ", asymmetry = " << (L - L.transpose()).cwiseAbs().maxCoeff();
    }
    msg << ")";
    throw NumericalError(msg.str());
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double subset_log_likelihood(const KernelBundle& bundle, const SubsetIndex& C) {
  const double num = log_det_submatrix(bundle.L, C);
  if (num == kNegInf) return kNegInf;
  return num - log_normalizer(bundle.L);
}

double subset_log_likelihood_factored(const KernelBundle& bundle, const SubsetIndex& C) {
  const double corr = log_det_submatrix(bundle.S, C);
  if (corr == kNegInf) return kNegInf;
  double additive = 0.0;
  for (int i : C) additive += 2.0 * std::log(bundle.q[i]);
  return additive + corr - log_normalizer(bundle.L);
}

Pmf enumerate_pmf(const Matrix& L, int cap) {
  if (L.rows() != L.cols()) throw ArgumentError("enumerate_pmf: matrix is not square");
  const int n = static_cast<int>(L.rows());
  if (n > cap || n > 30)
    throw CapacityError("enumerate_pmf: " + std::to_string(n) + " items exceeds cap " +
                        std::to_string(cap));
  Pmf pmf;
  pmf.n = n;
  const std::uint64_t count = std::uint64_t{1} << n;
  pmf.prob.resize(count);
  double total = 0.0;
  for (std::uint64_t m = 0; m < count; ++m) {
    const double ld = log_det_submatrix(L, SubsetIndex::from_mask(m, n));
    pmf.prob[m] = std::exp(ld);
    total += pmf.prob[m];
  }
  pmf.normalizer = total;
  for (double& p : pmf.prob) p /= total;
  return pmf;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ArgumentError("total_variation: size mismatch");
  double tv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
  return 0.5 * tv;
}

UtilityDecomposition implied_utility(const KernelBundle& bundle, const SubsetIndex& C) {
  UtilityDecomposition u;
  u.total = log_det_submatrix(bundle.L, C);
  for (int i : C) u.additive_part += 2.0 * std::log(bundle.q[i]);
  u.correction = log_det_submatrix(bundle.S, C);
  return u;
}

PriorSpec PriorSpec::defaults(int n_quality, int n_groups) {
  return {Vector::Zero(n_quality), Vector::Constant(n_quality, 2.0), Vector::Zero(n_groups),
          Vector::Ones(n_groups)};
}

void PriorSpec::validate(const KernelLayout& layout) const {
  if (beta_mean.size() != layout.n_quality() || beta_sd.size() != layout.n_quality())
    throw ArgumentError("prior: beta hyperparameters do not match the quality features");
  if (loglen_mean.size() != layout.n_groups() || loglen_sd.size() != layout.n_groups())
    throw ArgumentError("prior: lengthscale hyperparameters do not match the similarity groups");
  if ((beta_sd.array() <= 0).any() || (loglen_sd.array() <= 0).any())
    throw ArgumentError("prior: standard deviations must be positive");
}

namespace {
double gaussian_log_density(const Vector& x, const Vector& mean, const Vector& sd) {
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  return (-0.5 * ((x - mean).array() / sd.array()).square() - sd.array().log() - log_norm).sum();
}
}  // namespace

double PriorSpec::log_density(const ModelParams& params) const {
  return gaussian_log_density(params.beta, beta_mean, beta_sd) +
         gaussian_log_density(params.log_lengthscales, loglen_mean, loglen_sd);
}

Vector PriorSpec::log_density_gradient(const ModelParams& params) const {
  Vector g(params.dim());
  g << -((params.beta - beta_mean).array() / beta_sd.array().square()).matrix(),
      -((params.log_lengthscales - loglen_mean).array() / loglen_sd.array().square()).matrix();
  return g;
}

double observation_log_likelihood(const ModelParams& params, const Observation& obs,
                                  const SimilarityMode& mode) {
  return subset_log_likelihood(build_kernel(params, obs.items, mode), obs.chosen);
}

double dataset_log_posterior(const ModelParams& params, const Dataset& data,
                             const PriorSpec& priors, const SimilarityMode& mode) {
  double total = 0.0;
  for (const auto& obs : data.observations) {
    const double ll = observation_log_likelihood(params, obs, mode);
    if (ll == kNegInf) return kNegInf;
    total += ll;
  }
  return total + priors.log_density(params);
}

namespace {

// d/d(log l_g) of the observation log-likelihood, for Rbf similarity.
void add_lengthscale_gradient(const ModelParams& params, const Observation& obs,
                              const KernelBundle& b, const Matrix& inv_IL,
                              Eigen::Ref<Vector> out) {
  const int n = obs.items.size();
  const Matrix Xs = select_columns(obs.items.features, params.layout.similarity_features);
  const Vector lens = params.feature_lengthscales();
  const int groups = params.layout.n_groups();
  const auto& gid = params.layout.similarity_groups;

  const int nc = static_cast<int>(obs.chosen.size());
  Matrix Sc_inv;
  if (nc > 0) {
    const Matrix Sc = b.S(obs.chosen.indices(), obs.chosen.indices());
    Sc_inv = Sc.partialPivLu().inverse();
  }
  for (int g = 0; g < groups; ++g) {
    Matrix dS = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double d2 = 0.0;
        for (int k = 0; k < Xs.cols(); ++k) {
          if (gid[k] != g) continue;
          const double diff = (Xs(i, k) - Xs(j, k)) / lens[k];
          d2 += diff * diff;
        }
        dS(i, j) = dS(j, i) = b.S(i, j) * d2;
      }
    const Matrix dL = b.q.asDiagonal() * dS * b.q.asDiagonal();
    double term = -(inv_IL.cwiseProduct(dL)).sum();
    if (nc > 0) {
      const Matrix dSc = dS(obs.chosen.indices(), obs.chosen.indices());
      term += (Sc_inv.cwiseProduct(dSc.transpose())).sum();
    }
    out[g] += term;
  }
}

}  // namespace

Vector grad_log_posterior(const ModelParams& params, const Dataset& data,
                          const PriorSpec& priors, const GradientOptions& opts,
                          const SimilarityMode& mode) {
  const int dq = params.layout.n_quality();
  const int dg = params.layout.n_groups();
  Vector grad = Vector::Zero(dq + dg);
  const bool rbf = std::holds_alternative<similarity::Rbf>(mode);
  const bool analytic_len = rbf && opts.lengthscales == LengthscaleGradient::Analytic;
  if (analytic_len && std::get<similarity::Rbf>(mode).jitter != 0.0)
    throw ArgumentError("analytic lengthscale gradient does not support jitter");

  for (const auto& obs : data.observations) {
    const KernelBundle b = build_kernel(params, obs.items, mode);
    if (log_det_submatrix(b.L, obs.chosen) == -std::numeric_limits<double>::infinity())
      throw DomainError("grad_log_posterior: observation '" + obs.id +
                        "' has zero likelihood at these parameters");
    const int n = obs.items.size();
    Matrix IL = b.L;
    IL.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(IL);
    if (llt.info() != Eigen::Success) throw NumericalError("grad_log_posterior: I + L not PD");
    const Matrix inv_IL = llt.solve(Matrix::Identity(n, n));
    const Matrix Xq = quality_features(obs.items, params.layout);
    // K_ii = 1 - [(I + L)^-1]_ii
    const Vector k_diag = Vector::Ones(n) - inv_IL.diagonal();
    grad.head(dq) -= Xq.transpose() * k_diag;
    for (int i : obs.chosen) grad.head(dq) += Xq.row(i).transpose();
    if (analytic_len) add_lengthscale_gradient(params, obs, b, inv_IL, grad.tail(dg));
  }
  grad += priors.log_density_gradient(params);

  if (rbf && !analytic_len && dg > 0) {
    const Vector theta = params.packed();
    for (int g = 0; g < dg; ++g) {
      const int k = dq + g;
      const double h = opts.fd_step * std::max(1.0, std::abs(theta[k]));
      Vector up = theta, down = theta;
      up[k] += h;
      down[k] -= h;
      const double fu =
          dataset_log_posterior(ModelParams::unpack(up, params.layout), data, priors, mode);
      const double fd =
          dataset_log_posterior(ModelParams::unpack(down, params.layout), data, priors, mode);
      if (!std::isfinite(fu) || !std::isfinite(fd))
        throw DomainError("grad_log_posterior: -inf within the finite-difference stencil");
      grad[k] = (fu - fd) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace dcm
