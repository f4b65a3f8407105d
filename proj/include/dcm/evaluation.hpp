#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcm/baselines.hpp"
#include "dcm/dataset.hpp"
#include "dcm/inference.hpp"
#include "dcm/rng.hpp"
#include "dcm/simulation.hpp"

namespace dcm {

/// Matthews correlation of two 0/1 label vectors. Returns 0 when any margin
/// of the confusion matrix is empty.
double mcc(const std::vector<int>& y, const std::vector<int>& yhat);

/// One predicted subset per observation of `eval`, for a single posterior draw.
using Predictor = std::function<std::vector<SubsetIndex>(const Dataset& eval, Rng& rng)>;

/// Echoes the observed choices.
Predictor oracle_predictor();
/// Each call picks one parameter vector uniformly from the kept draws and
/// samples every observation's DPP spectrally.
Predictor determinantal_predictor(PosteriorChains chains,
                                  SimilarityMode mode = similarity::Rbf{});
Predictor baseline_predictor(BaselineKind kind, Vector beta);

enum class CiMethod { Normal, Bootstrap };

struct ModelScore {
  double mean = 0.0;
  double ci_half = 0.0;  // half-width of the 95% interval
  int n = 0;             // observations
};

/// MCC of every (draw, observation) prediction against the truth; the grand
/// mean and a 95% interval over per-observation mean MCCs. Draw k uses
/// rng.derive(k), so models scored with the same rng share random streams.
ModelScore evaluate_model(const Predictor& predict, const Dataset& eval, int n_draws,
                          const Rng& rng, CiMethod ci = CiMethod::Normal);

enum class FitMethod { Map, Mcmc };

struct SweepConfig {
  std::vector<double> radii{0.05, 0.1, 0.2, 0.35, 0.5, 1.0, 1.5, 2.5};
  int n_train = 200;
  int n_eval = 50;
  int n_draws = 200;
  FitMethod method = FitMethod::Map;
  SpatialConfig spatial;
  OptConfig opt;
  McmcConfig mcmc;
  std::optional<PriorSpec> priors;  // PriorSpec::defaults when empty
  CiMethod ci = CiMethod::Normal;
};

struct SweepRow {
  double radius = 0.0;
  std::string model;
  double mcc_mean = 0.0;
  double ci_half = 0.0;
  int n = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::string> notes;
  std::vector<std::string> failures;  // one per radius that could not be fitted

  const SweepRow* find(double radius, const std::string& model) const;
  /// Columns radius, model, mcc_mean, ci_half, n.
  std::string to_csv() const;
  /// {"notes": [...], "failures": [...], "rows": [...], "series": {model: {radius, mcc, lo, hi}}}
  std::string to_json() const;
};

/// Per radius: generate train/eval data, standardize with train statistics,
/// fit the determinantal model, logistic and MNL (split-singletons) under the
/// same prior, score all three on the same eval split with shared streams.
SweepReport run_sweep_experiment(const SweepConfig& cfg, const Rng& rng);

}  // namespace dcm
