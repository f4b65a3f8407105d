#include "dcm/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dcm/errors.hpp"
#include "dcm/sampling.hpp"

namespace dcm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dims(const Vector& beta, const Matrix& Xq) {
  if (beta.size() != Xq.cols())
    throw ArgumentError("baseline: beta has " + std::to_string(beta.size()) +
                        " entries, features have " + std::to_string(Xq.cols()));
}

// log(1 + sum_j exp(z_j))
double log_one_plus_sum_exp(const Vector& z) {
  const double m = std::max(0.0, z.size() ? z.maxCoeff() : 0.0);
  return m + std::log(std::exp(-m) + (z.array() - m).exp().sum());
}

double beta_log_prior(const Vector& beta, const PriorSpec& priors) {
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  return (-0.5 * ((beta - priors.beta_mean).array() / priors.beta_sd.array()).square() -
          priors.beta_sd.array().log() - log_norm)
      .sum();
}

void check_policy(BaselineKind kind, const Dataset& data, MultiChoicePolicy policy) {
  if (kind != BaselineKind::Mnl || policy != MultiChoicePolicy::Reject) return;
  for (const auto& obs : data.observations)
    if (obs.chosen.size() >= 2)
      throw DataError("MNL cannot be trained on observation '" + obs.id + "' which chose " +
                      std::to_string(obs.chosen.size()) +
                      " items; enable the split-singletons convention to allow it");
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  return kind == BaselineKind::Logistic ? "logistic" : "mnl";
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic_log_likelihood(const Vector& beta, const Matrix& Xq, const SubsetIndex& C) {
  check_dims(beta, Xq);
  C.validate(static_cast<int>(Xq.rows()));
  const Vector z = Xq * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    ll -= C.contains(static_cast<int>(i)) ? softplus(-z[i]) : softplus(z[i]);
  return ll;
}

double mnl_log_likelihood(const Vector& beta, const Matrix& Xq, const SubsetIndex& C) {
  check_dims(beta, Xq);
  C.validate(static_cast<int>(Xq.rows()));
  if (C.size() >= 2) return kNegInf;
  const Vector z = Xq * beta;
  const double lse = log_one_plus_sum_exp(z);
  return C.empty() ? -lse : z[C[0]] - lse;
}

namespace {

double observation_term(BaselineKind kind, const Vector& beta, const Matrix& Xq,
                        const SubsetIndex& C, MultiChoicePolicy policy) {
  if (kind == BaselineKind::Logistic) return logistic_log_likelihood(beta, Xq, C);
  if (C.size() >= 2 && policy == MultiChoicePolicy::SplitSingletons) {
    double ll = 0.0;
    for (int i : C) ll += mnl_log_likelihood(beta, Xq, SubsetIndex{i});
    return ll;
  }
  return mnl_log_likelihood(beta, Xq, C);
}

}  // namespace

double baseline_log_posterior(BaselineKind kind, const Vector& beta, const Dataset& data,
                              const PriorSpec& priors, MultiChoicePolicy policy) {
  double total = beta_log_prior(beta, priors);
  for (const auto& obs : data.observations) {
    total += observation_term(kind, beta, quality_features(obs.items, data.schema.layout),
                              obs.chosen, policy);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

Vector baseline_grad_log_posterior(BaselineKind kind, const Vector& beta, const Dataset& data,
                                   const PriorSpec& priors, MultiChoicePolicy policy) {
  Vector g = -((beta - priors.beta_mean).array() / priors.beta_sd.array().square()).matrix();
  for (const auto& obs : data.observations) {
    const Matrix Xq = quality_features(obs.items, data.schema.layout);
    check_dims(beta, Xq);
    const Vector z = Xq * beta;
    if (kind == BaselineKind::Logistic) {
      Vector resid(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i)
        resid[i] = (obs.chosen.contains(static_cast<int>(i)) ? 1.0 : 0.0) -
                   1.0 / (1.0 + std::exp(-z[i]));
      g += Xq.transpose() * resid;
      continue;
    }
    if (obs.chosen.size() >= 2 && policy == MultiChoicePolicy::Reject)
      throw DomainError("MNL gradient undefined for multi-item choice '" + obs.id + "'");
    const double lse = log_one_plus_sum_exp(z);
    const Vector p = (z.array() - lse).exp();
    const Vector expected = Xq.transpose() * p;
    if (obs.chosen.empty()) {
      g -= expected;
    } else {
      for (int i : obs.chosen) g += Xq.row(i).transpose() - expected;
    }
  }
  return g;
}

FitResult fit_baseline(BaselineKind kind, const Dataset& data, const PriorSpec& priors,
                       const OptConfig& config, MultiChoicePolicy policy) {
  check_policy(kind, data, policy);
  const KernelLayout& layout = data.schema.layout;
  if (priors.beta_mean.size() != layout.n_quality() || priors.beta_sd.size() != layout.n_quality())
    throw ArgumentError("fit_baseline: prior does not match the quality features");
  auto f = [&](const Vector& b) { return baseline_log_posterior(kind, b, data, priors, policy); };
  auto g = [&](const Vector& b) {
    return baseline_grad_log_posterior(kind, b, data, priors, policy);
  };
  Vector init = Vector::Zero(layout.n_quality());
  if (!std::isfinite(f(init)))
    throw FitError(std::string(to_string(kind)) + " log-posterior is not finite at the start");
  const OptimizeResult opt = maximize_bfgs(f, g, init, config);

  FitResult out;
  out.model = std::string(to_string(kind));
  out.params.layout = layout;
  out.params.beta = opt.x;
  out.params.log_lengthscales = Vector::Zero(0);
  out.params.layout.similarity_features.clear();
  out.params.layout.similarity_groups.clear();
  out.log_posterior = opt.value;
  out.grad_norm = opt.grad.lpNorm<Eigen::Infinity>();
  out.iterations = opt.iterations;
  out.converged = opt.converged;
  out.covariance = opt.inv_hessian;
  out.provenance = {{"model", out.model},
                    {"optimizer", "bfgs"},
                    {"max_iterations", std::to_string(config.max_iterations)},
                    {"multi_choice_policy", policy == MultiChoicePolicy::Reject
                                                ? "reject"
                                                : "split_singletons"}};
  return out;
}

SubsetIndex baseline_predict(BaselineKind kind, const Vector& beta, const Matrix& Xq, Rng& rng) {
  check_dims(beta, Xq);
  const Vector z = Xq * beta;
  std::vector<int> items;
  if (kind == BaselineKind::Logistic) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      if (rng.uniform() < p) items.push_back(static_cast<int>(i));
    }
    return SubsetIndex(std::move(items));
  }
  Vector w(z.size() + 1);
  const double m = std::max(0.0, z.size() ? z.maxCoeff() : 0.0);
  w[0] = std::exp(-m);
  w.tail(z.size()) = (z.array() - m).exp();
  const std::size_t k = sample_categorical(w, rng);
  if (k == 0) return {};
  return SubsetIndex{static_cast<int>(k - 1)};
}

}  // namespace dcm
