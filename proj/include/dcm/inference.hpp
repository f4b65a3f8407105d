#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcm/dataset.hpp"
#include "dcm/diagnostics.hpp"
#include "dcm/fit_result.hpp"
#include "dcm/likelihood.hpp"
#include "dcm/optimize.hpp"
#include "dcm/rng.hpp"

namespace dcm {

/// MAP estimate of (beta, log l) by BFGS on dataset_log_posterior.
///
/// Starts from beta = 0, log l = 0 unless `init` is given. If the start has
/// zero likelihood (chosen items too similar) the lengthscales are shrunk
/// until it does not; FitError names the offending observation otherwise.
FitResult map_fit(const Dataset& data, const PriorSpec& priors, const OptConfig& config = {},
                  const SimilarityMode& mode = similarity::Rbf{},
                  const std::optional<ModelParams>& init = std::nullopt);

struct McmcConfig {
  int chains = 25;
  int warmup = 2000;
  int steps = 5000;  // kept draws per chain
  int adapt_start = 200;
  int adapt_every = 50;
  /// Initial points are centre + init_spread * chol(cov) * z.
  double init_spread = 2.0;
  int threads = 1;
};

/// Kept post-warmup draws, chain-major: draws[(c * steps + s) * dim + p].
struct PosteriorChains {
  int n_chains = 0;
  int n_steps = 0;
  int dim = 0;
  int warmup = 0;
  std::vector<double> draws;
  std::vector<double> acceptance_rates;
  std::vector<std::string> param_names;
  KernelLayout layout;

  double at(int c, int s, int p) const {
    return draws[(static_cast<std::size_t>(c) * n_steps + s) * dim + p];
  }
  Vector draw(int c, int s) const;
  /// All draws of parameter p, one vector per chain.
  std::vector<std::vector<double>> parameter(int p) const;
  Vector mean() const;
  Vector sd() const;

  /// A one-draw posterior at a point estimate (e.g. a MAP fit).
  static PosteriorChains point_mass(const ModelParams& params);
};

/// Random-walk Metropolis on an arbitrary log density. The proposal starts as
/// (2.38^2 / dim) * init_cov and, during warmup only, tracks the chain's running
/// sample covariance with the same scaling; it is frozen after warmup.
/// Throws DiagnosticsError if a chain accepts nothing during warmup.
PosteriorChains adaptive_mh_target(const std::function<double(const Vector&)>& log_target,
                                   const Vector& centre, const Matrix& init_cov,
                                   const McmcConfig& config, const Rng& rng);

/// Posterior sampling for the determinantal model, initialized around the MAP.
PosteriorChains adaptive_mh(const Dataset& data, const PriorSpec& priors,
                            const McmcConfig& config, const Rng& rng,
                            const SimilarityMode& mode = similarity::Rbf{},
                            const OptConfig& opt = {});

struct PredictOptions {
  double rhat_gate = 1.05;
  bool override_gate = false;
};

struct Prediction {
  std::string observation_id;
  int draw = 0;
  SubsetIndex chosen;
};

/// For each of n_draws: one parameter vector uniformly from the kept draws,
/// then one spectral DPP sample per evaluation observation. Chains with fewer
/// than two chains or 100 steps skip the R-hat gate.
std::vector<Prediction> posterior_predict(const Dataset& eval, const PosteriorChains& chains,
                                          const Rng& rng, int n_draws,
                                          const PredictOptions& options = {},
                                          const SimilarityMode& mode = similarity::Rbf{});

/// Throws DiagnosticsError if any R-hat exceeds the gate (unless overridden).
void check_rhat_gate(const PosteriorChains& chains, const PredictOptions& options);

}  // namespace dcm
