#include "dcm/inference.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "dcm/errors.hpp"
#include "dcm/sampling.hpp"

namespace dcm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string first_zero_likelihood(const ModelParams& params, const Dataset& data,
                                  const SimilarityMode& mode) {
  for (const auto& obs : data.observations)
    if (observation_log_likelihood(params, obs, mode) == kNegInf) return obs.id;
  return {};
}

// Inverse of the negative Hessian by central differences of the gradient.
std::optional<Matrix> laplace_covariance(const std::function<Vector(const Vector&)>& grad,
                                         const Vector& x) {
  const Eigen::Index n = x.size();
  Matrix H(n, n);
  try {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double h = 1e-4 * std::max(1.0, std::abs(x[k]));
      Vector up = x, down = x;
      up[k] += h;
      down[k] -= h;
      H.col(k) = (grad(up) - grad(down)) / (2.0 * h);
    }
  } catch (const DomainError&) {
    return std::nullopt;
  }
  const Matrix neg = -0.5 * (H + H.transpose());
  Eigen::LLT<Matrix> llt(neg);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt.solve(Matrix::Identity(n, n));
}

Matrix robust_cholesky(const Matrix& cov) {
  const Eigen::Index n = cov.rows();
  double ridge = 0.0;
  for (int attempt = 0; attempt < 30; ++attempt) {
    Matrix c = cov;
    c.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    ridge = ridge == 0.0 ? 1e-10 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff())
                         : ridge * 10.0;
  }
  return Matrix::Identity(n, n) * 1e-3;
}

}  // namespace

FitResult map_fit(const Dataset& data, const PriorSpec& priors, const OptConfig& config,
                  const SimilarityMode& mode, const std::optional<ModelParams>& init) {
  const KernelLayout& layout = data.schema.layout;
  priors.validate(layout);
  ModelParams start = init.value_or(ModelParams{Vector::Zero(layout.n_quality()),
                                                Vector::Zero(layout.n_groups()), layout});
  start.validate();

  double f0 = dataset_log_posterior(start, data, priors, mode);
  int shrinks = 0;
  while (f0 == kNegInf && layout.n_groups() > 0 && shrinks < 20) {
    start.log_lengthscales.array() -= 1.0;
    ++shrinks;
    f0 = dataset_log_posterior(start, data, priors, mode);
  }
  if (!std::isfinite(f0)) {
    const std::string bad = first_zero_likelihood(start, data, mode);
    throw FitError("map_fit: no finite log-posterior near the start; observation '" + bad +
                   "' has zero likelihood (its chosen items are indistinguishable to the "
                   "similarity model)");
  }

  auto f = [&](const Vector& theta) {
    return dataset_log_posterior(ModelParams::unpack(theta, layout), data, priors, mode);
  };
  auto g = [&](const Vector& theta) {
    return grad_log_posterior(ModelParams::unpack(theta, layout), data, priors,
                              config.gradient, mode);
  };
  const OptimizeResult opt = maximize_bfgs(f, g, start.packed(), config);

  FitResult out;
  out.model = "determinantal";
  out.params = ModelParams::unpack(opt.x, layout);
  out.log_posterior = opt.value;
  out.grad_norm = opt.grad.lpNorm<Eigen::Infinity>();
  out.iterations = opt.iterations;
  out.converged = opt.converged;
  out.covariance = laplace_covariance(g, opt.x).value_or(opt.inv_hessian);
  out.provenance = {
      {"model", "determinantal"},
      {"optimizer", "bfgs"},
      {"max_iterations", std::to_string(config.max_iterations)},
      {"lengthscale_gradient", config.gradient.lengthscales == LengthscaleGradient::Analytic
                                   ? "analytic"
                                   : "finite_difference"},
      {"init_lengthscale_shrinks", std::to_string(shrinks)}};
  return out;
}

Vector PosteriorChains::draw(int c, int s) const {
  Vector v(dim);
  for (int p = 0; p < dim; ++p) v[p] = at(c, s, p);
  return v;
}

std::vector<std::vector<double>> PosteriorChains::parameter(int p) const {
  std::vector<std::vector<double>> out(n_chains, std::vector<double>(n_steps));
  for (int c = 0; c < n_chains; ++c)
    for (int s = 0; s < n_steps; ++s) out[c][s] = at(c, s, p);
  return out;
}

Vector PosteriorChains::mean() const {
  Vector m = Vector::Zero(dim);
  for (int c = 0; c < n_chains; ++c)
    for (int s = 0; s < n_steps; ++s) m += draw(c, s);
  return m / static_cast<double>(n_chains * n_steps);
}

Vector PosteriorChains::sd() const {
  const Vector m = mean();
  Vector v = Vector::Zero(dim);
  for (int c = 0; c < n_chains; ++c)
    for (int s = 0; s < n_steps; ++s) v += (draw(c, s) - m).array().square().matrix();
  const double denom = std::max(1, n_chains * n_steps - 1);
  return (v / denom).array().sqrt();
}

PosteriorChains PosteriorChains::point_mass(const ModelParams& params) {
  PosteriorChains pc;
  pc.n_chains = 1;
  pc.n_steps = 1;
  pc.dim = params.dim();
  const Vector theta = params.packed();
  pc.draws.assign(theta.data(), theta.data() + theta.size());
  pc.acceptance_rates = {0.0};
  pc.layout = params.layout;
  return pc;
}

namespace {

struct ChainOutput {
  std::vector<double> draws;
  double acceptance = 0.0;
};

ChainOutput run_chain(const std::function<double(const Vector&)>& log_target,
                      const Vector& centre, const Matrix& init_chol, const McmcConfig& cfg,
                      Rng rng, int chain_index) {
  const Eigen::Index p = centre.size();
  const double scale = 2.38 * 2.38 / static_cast<double>(p);

  Vector x = centre;
  double lp = kNegInf;
  for (int attempt = 0; attempt < 100 && !std::isfinite(lp); ++attempt) {
    Vector z(p);
    for (auto& v : z) v = rng.normal();
    x = centre + cfg.init_spread * init_chol * z;
    lp = log_target(x);
  }
  if (!std::isfinite(lp)) {
    x = centre;
    lp = log_target(x);
    if (!std::isfinite(lp)) throw DomainError("adaptive_mh: log target is -inf at the centre");
  }

  Matrix prop_chol = std::sqrt(scale) * init_chol;
  Vector run_mean = Vector::Zero(p);
  Matrix run_m2 = Matrix::Zero(p, p);
  long count = 0;
  long warm_accepts = 0, kept_accepts = 0;

  ChainOutput out;
  out.draws.reserve(static_cast<std::size_t>(cfg.steps) * p);
  const int total = cfg.warmup + cfg.steps;
  for (int it = 0; it < total; ++it) {
    Vector z(p);
    for (auto& v : z) v = rng.normal();
    const Vector proposal = x + prop_chol * z;
    const double lp_new = log_target(proposal);
    const double log_u = std::log(rng.uniform_open());
    const bool accept = std::isfinite(lp_new) && log_u < lp_new - lp;
    if (accept) {
      x = proposal;
      lp = lp_new;
    }
    if (it < cfg.warmup) {
      warm_accepts += accept;
      ++count;
      const Vector delta = x - run_mean;
      run_mean += delta / static_cast<double>(count);
      run_m2 += delta * (x - run_mean).transpose();
      if (it + 1 >= cfg.adapt_start && (it + 1) % cfg.adapt_every == 0 && count > p + 1) {
        Matrix cov = run_m2 / static_cast<double>(count - 1);
        cov = 0.5 * (cov + cov.transpose());
        cov.diagonal().array() += 1e-10;
        prop_chol = std::sqrt(scale) * robust_cholesky(cov);
      }
      if (it + 1 == cfg.warmup && warm_accepts == 0)
        throw DiagnosticsError("adaptive_mh: chain " + std::to_string(chain_index) +
                               " accepted no proposals in " + std::to_string(cfg.warmup) +
                               " warmup steps (initial log target " + std::to_string(lp) + ")");
    } else {
      kept_accepts += accept;
      out.draws.insert(out.draws.end(), x.data(), x.data() + p);
    }
  }
  out.acceptance = cfg.steps > 0 ? static_cast<double>(kept_accepts) / cfg.steps : 0.0;
  return out;
}

}  // namespace

PosteriorChains adaptive_mh_target(const std::function<double(const Vector&)>& log_target,
                                   const Vector& centre, const Matrix& init_cov,
                                   const McmcConfig& config, const Rng& rng) {
  if (config.chains < 1 || config.steps < 1 || config.warmup < 0)
    throw ArgumentError("adaptive_mh: chains and steps must be positive");
  const int p = static_cast<int>(centre.size());
  const Matrix init_chol = robust_cholesky(init_cov);

  std::vector<ChainOutput> outputs(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto work = [&](int c) {
    try {
      outputs[c] = run_chain(log_target, centre, init_chol, config, rng.derive(c), c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const int threads = std::max(1, std::min(config.threads, config.chains));
  if (threads == 1) {
    for (int c = 0; c < config.chains; ++c) work(c);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int c = t; c < config.chains; c += threads) work(c);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorChains pc;
  pc.n_chains = config.chains;
  pc.n_steps = config.steps;
  pc.dim = p;
  pc.warmup = config.warmup;
  for (auto& o : outputs) {
    pc.draws.insert(pc.draws.end(), o.draws.begin(), o.draws.end());
    pc.acceptance_rates.push_back(o.acceptance);
  }
  return pc;
}

PosteriorChains adaptive_mh(const Dataset& data, const PriorSpec& priors,
                            const McmcConfig& config, const Rng& rng,
                            const SimilarityMode& mode, const OptConfig& opt) {
  const KernelLayout& layout = data.schema.layout;
  const FitResult map = map_fit(data, priors, opt, mode);
  Matrix cov = map.covariance;
  if (cov.rows() != map.params.dim() || !cov.allFinite()) {
    Vector var(map.params.dim());
    var << priors.beta_sd.array().square().matrix(), priors.loglen_sd.array().square().matrix();
    cov = var.asDiagonal();
  }
  auto target = [&](const Vector& theta) {
    return dataset_log_posterior(ModelParams::unpack(theta, layout), data, priors, mode);
  };
  PosteriorChains pc = adaptive_mh_target(target, map.params.packed(), cov, config, rng);
  pc.layout = layout;
  pc.param_names = data.schema.parameter_names();
  return pc;
}

void check_rhat_gate(const PosteriorChains& chains, const PredictOptions& options) {
  if (options.override_gate || chains.n_chains < 2 || chains.n_steps < 100) return;
  const Diagnostics d = diagnostics(chains);
  for (int p = 0; p < chains.dim; ++p)
    if (!(d.rhat[p] <= options.rhat_gate)) {
      const std::string name =
          p < static_cast<int>(chains.param_names.size()) ? chains.param_names[p]
                                                          : "parameter " + std::to_string(p);
      throw DiagnosticsError("R-hat of " + name + " is " + std::to_string(d.rhat[p]) +
                             ", above the gate " + std::to_string(options.rhat_gate) +
                             "; override the gate to predict anyway");
    }
}

std::vector<Prediction> posterior_predict(const Dataset& eval, const PosteriorChains& chains,
                                          const Rng& rng, int n_draws,
                                          const PredictOptions& options,
                                          const SimilarityMode& mode) {
  check_rhat_gate(chains, options);
  if (chains.n_chains * chains.n_steps == 0) throw ArgumentError("posterior has no draws");
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(n_draws) * eval.size());
  const std::size_t total = static_cast<std::size_t>(chains.n_chains) * chains.n_steps;
  for (int k = 0; k < n_draws; ++k) {
    Rng r = rng.derive(static_cast<std::uint64_t>(k));
    const std::size_t pick = r.index(total);
    const ModelParams params = ModelParams::unpack(
        chains.draw(static_cast<int>(pick / chains.n_steps), static_cast<int>(pick % chains.n_steps)),
        chains.layout);
    for (const auto& obs : eval.observations) {
      const KernelBundle b = build_kernel(params, obs.items, mode);
      out.push_back({obs.id, k, SpectralSampler(b.L)(r)});
    }
  }
  return out;
}

}  // namespace dcm
