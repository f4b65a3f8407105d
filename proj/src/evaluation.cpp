#include "dcm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "dcm/errors.hpp"
#include "dcm/sampling.hpp"

namespace dcm {

double mcc(const std::vector<int>& y, const std::vector<int>& yhat) {
  if (y.size() != yhat.size())
    throw ArgumentError("mcc: label vectors have lengths " + std::to_string(y.size()) + " and " +
                        std::to_string(yhat.size()));
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool t = y[i] != 0, p = yhat[i] != 0;
    tp += t && p;
    tn += !t && !p;
    fp += !t && p;
    fn += t && !p;
  }
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return std::clamp((tp * tn - fp * fn) / std::sqrt(denom), -1.0, 1.0);
}

Predictor oracle_predictor() {
  return [](const Dataset& eval, Rng&) {
    std::vector<SubsetIndex> out;
    for (const auto& obs : eval.observations) out.push_back(obs.chosen);
    return out;
  };
}

Predictor determinantal_predictor(PosteriorChains chains, SimilarityMode mode) {
  return [chains = std::move(chains), mode = std::move(mode)](const Dataset& eval, Rng& rng) {
    const std::size_t total = static_cast<std::size_t>(chains.n_chains) * chains.n_steps;
    const std::size_t pick = rng.index(total);
    const ModelParams params = ModelParams::unpack(
        chains.draw(static_cast<int>(pick / chains.n_steps),
                    static_cast<int>(pick % chains.n_steps)),
        chains.layout);
    std::vector<SubsetIndex> out;
    for (const auto& obs : eval.observations)
      out.push_back(SpectralSampler(build_kernel(params, obs.items, mode).L)(rng));
    return out;
  };
}

Predictor baseline_predictor(BaselineKind kind, Vector beta) {
  return [kind, beta = std::move(beta)](const Dataset& eval, Rng& rng) {
    std::vector<SubsetIndex> out;
    for (const auto& obs : eval.observations)
      out.push_back(
          baseline_predict(kind, beta, quality_features(obs.items, eval.schema.layout), rng));
    return out;
  };
}

ModelScore evaluate_model(const Predictor& predict, const Dataset& eval, int n_draws,
                          const Rng& rng, CiMethod ci) {
  if (eval.empty()) throw ArgumentError("evaluate_model: evaluation set is empty");
  if (n_draws < 1) throw ArgumentError("evaluate_model: n_draws must be positive");
  const std::size_t n_obs = eval.size();
  std::vector<double> per_obs(n_obs, 0.0);
  for (int k = 0; k < n_draws; ++k) {
    Rng r = rng.derive(static_cast<std::uint64_t>(k));
    const auto preds = predict(eval, r);
    if (preds.size() != n_obs) throw ArgumentError("predictor returned the wrong number of subsets");
    for (std::size_t o = 0; o < n_obs; ++o) {
      const int n = eval.observations[o].items.size();
      per_obs[o] += mcc(labels_of(eval.observations[o].chosen, n), labels_of(preds[o], n));
    }
  }
  for (double& v : per_obs) v /= n_draws;

  ModelScore s;
  s.n = static_cast<int>(n_obs);
  double sum = 0.0;
  for (double v : per_obs) sum += v;
  s.mean = sum / static_cast<double>(n_obs);
  if (n_obs < 2) return s;
  if (ci == CiMethod::Normal) {
    double ss = 0.0;
    for (double v : per_obs) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(n_obs - 1));
    s.ci_half = 1.96 * sd / std::sqrt(static_cast<double>(n_obs));
  } else {
    Rng br = rng.derive(0xb0075ULL);
    constexpr int kResamples = 2000;
    std::vector<double> means(kResamples);
    for (double& m : means) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n_obs; ++k) acc += per_obs[br.index(n_obs)];
      m = acc / static_cast<double>(n_obs);
    }
    std::sort(means.begin(), means.end());
    const double lo = means[static_cast<std::size_t>(0.025 * kResamples)];
    const double hi = means[static_cast<std::size_t>(0.975 * kResamples) - 1];
    s.ci_half = 0.5 * (hi - lo);
  }
  return s;
}

const SweepRow* SweepReport::find(double radius, const std::string& model) const {
  for (const auto& r : rows)
    if (r.radius == radius && r.model == model) return &r;
  return nullptr;
}

namespace {
std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string SweepReport::to_csv() const {
  std::ostringstream os;
  os << "radius,model,mcc_mean,ci_half,n\n";
  for (const auto& r : rows)
    os << fmt17(r.radius) << ',' << r.model << ',' << fmt17(r.mcc_mean) << ','
       << fmt17(r.ci_half) << ',' << r.n << '\n';
  return os.str();
}

std::string SweepReport::to_json() const {
  nlohmann::ordered_json j;
  j["notes"] = notes;
  j["failures"] = failures;
  j["rows"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json series = nlohmann::ordered_json::object();
  for (const auto& r : rows) {
    j["rows"].push_back({{"radius", r.radius},
                         {"model", r.model},
                         {"mcc_mean", r.mcc_mean},
                         {"ci_half", r.ci_half},
                         {"n", r.n}});
    auto& s = series[r.model];
    s["radius"].push_back(r.radius);
    s["mcc"].push_back(r.mcc_mean);
    s["lo"].push_back(r.mcc_mean - r.ci_half);
    s["hi"].push_back(r.mcc_mean + r.ci_half);
  }
  j["series"] = series;
  return j.dump(2) + "\n";
}

SweepReport run_sweep_experiment(const SweepConfig& cfg, const Rng& rng) {
  SweepReport report;
  report.notes = {
      "desk-scale defaults: radii grid, dataset sizes and prediction draws are chosen here",
      "mcc is 0 when a confusion-matrix margin is empty",
      "MNL is trained with each chosen item of a multi-item choice as its own singleton choice",
      std::string("determinantal fit: ") + (cfg.method == FitMethod::Map ? "map" : "mcmc"),
      "ci: " + std::string(cfg.ci == CiMethod::Normal ? "normal approximation"
                                                      : "percentile bootstrap") +
          " over per-observation mean MCC"};
  const auto splits = radius_sweep(cfg.radii, cfg.n_train, cfg.n_eval, cfg.spatial, rng.derive(0));
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto& split = splits[i];
    try {
      const Standardization st = compute_standardization(split.train);
      const Dataset train = standardized(split.train, st);
      const Dataset eval = standardized(split.eval, st);
      const PriorSpec priors = cfg.priors.value_or(PriorSpec::defaults(train.schema.layout));

      PosteriorChains det;
      if (cfg.method == FitMethod::Map) {
        det = PosteriorChains::point_mass(map_fit(train, priors, cfg.opt).params);
      } else {
        det = adaptive_mh(train, priors, cfg.mcmc, rng.derive({1, i}), similarity::Rbf{}, cfg.opt);
      }
      const FitResult logit = fit_baseline(BaselineKind::Logistic, train, priors, cfg.opt);
      const FitResult mnl = fit_baseline(BaselineKind::Mnl, train, priors, cfg.opt,
                                         MultiChoicePolicy::SplitSingletons);

      const Rng eval_rng = rng.derive({2, i});
      const std::pair<std::string, Predictor> models[] = {
          {"determinantal", determinantal_predictor(det)},
          {"logistic", baseline_predictor(BaselineKind::Logistic, logit.params.beta)},
          {"mnl", baseline_predictor(BaselineKind::Mnl, mnl.params.beta)}};
      for (const auto& [name, predictor] : models) {
        const ModelScore s = evaluate_model(predictor, eval, cfg.n_draws, eval_rng, cfg.ci);
        report.rows.push_back({split.radius, name, s.mean, s.ci_half, s.n});
      }
    } catch (const Error& e) {
      report.failures.push_back("radius " + fmt17(split.radius) + ": " + e.what());
    }
  }
  return report;
}

}  // namespace dcm
