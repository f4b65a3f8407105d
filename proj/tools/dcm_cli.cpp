// dcm: simulate, fit, verify, sweep, predict, evaluate and replay.
//
// Every command writes its outputs and a manifest.json into --out.
// Exit codes: 0 ok, 1 I/O or data error, 2 usage error, 3 verification failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dcm/baselines.hpp"
#include "dcm/diagnostics.hpp"
#include "dcm/errors.hpp"
#include "dcm/evaluation.hpp"
#include "dcm/inference.hpp"
#include "dcm/io.hpp"
#include "dcm/simulation.hpp"
#include "dcm/verify.hpp"

namespace fs = std::filesystem;
using dcm::io::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;

struct Exit {
  int code;
  std::string message;
};

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    throw Exit{kExitUsage, what + ": not a non-negative integer: '" + text + "'"};
  }
  if (used != text.size()) throw Exit{kExitUsage, what + ": not a non-negative integer: '" + text + "'"};
  return v;
}

/// Output directory plus the manifest being assembled for it.
class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, fs::path out, std::uint64_t seed)
      : out_(std::move(out)) {
    manifest_.command = std::move(command);
    manifest_.argv = std::move(argv);
    manifest_.seed = seed;
    manifest_.started = dcm::io::utc_now();
    manifest_.config = json::object();
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw dcm::DataError("cannot create output directory " + out_.string() + ": " + ec.message());
  }

  json& config() { return manifest_.config; }
  std::uint64_t seed() const { return manifest_.seed; }

  void input(const fs::path& path) {
    manifest_.inputs.emplace_back(path.string(), dcm::io::sha256_file(path));
  }

  void output(const std::string& name, const std::string& text) {
    dcm::io::write_text(out_ / name, text);
    manifest_.outputs.emplace_back(name, dcm::io::sha256_hex(text));
  }

  void output_json(const std::string& name, const json& j) { output(name, j.dump(2) + "\n"); }

  void finish() {
    manifest_.finished = dcm::io::utc_now();
    dcm::io::write_json(out_ / "manifest.json", dcm::io::manifest_to_json(manifest_));
  }

 private:
  fs::path out_;
  dcm::io::RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// Options

struct Common {
  std::optional<std::string> seed;
  std::string out = "dcm-run";
};

struct SimulateOpts {
  std::string kind = "spatial";
  int n = 200;
  int eval_n = 0;
  int n_items = 15;
  double radius = 0.5;
  double half_width = 2.0;
  double gamma0 = -5.0;
  double gamma1 = 2.5;
  int k_min = 7;
  int k_max = 9;
  bool no_preamble_capture = false;
  std::vector<double> beta{1.0, -1.0};
  double lengthscale = 0.5;
};

struct FitOpts {
  std::string data;
  std::string method = "map";
  std::string similarity = "rbf";
  std::string multi = "reject";
  int chains = 4;
  int warmup = 1000;
  int steps = 2000;
  int max_iter = 2000;
  double beta_sd = 2.0;
  double loglen_sd = 1.0;
};

struct VerifyOpts {
  int trials = 0;
  int draws = 100000;
  bool inject_fault = false;
};

struct SweepOpts {
  std::vector<double> radii = dcm::SweepConfig{}.radii;
  int n_train = 200;
  int n_eval = 50;
  int draws = 200;
  std::string method = "map";
  int chains = 4;
  int warmup = 1000;
  int steps = 2000;
  std::string ci = "normal";
};

struct PredictOpts {
  std::string fit;
  std::string data;
  std::string chains;
  int draws = 1;
  bool override_gate = false;
  double rhat_gate = 1.05;
  std::string ci = "normal";
};

struct ReplayOpts {
  std::string manifest;
};

dcm::SimilarityMode similarity_mode(const std::string& name) {
  if (name == "rbf") return dcm::similarity::Rbf{};
  if (name == "identity") return dcm::similarity::Identity{};
  if (name == "allones") return dcm::similarity::AllOnes{};
  throw Exit{kExitUsage, "unknown similarity '" + name + "'"};
}

dcm::CiMethod ci_method(const std::string& name) {
  return name == "bootstrap" ? dcm::CiMethod::Bootstrap : dcm::CiMethod::Normal;
}

std::string provenance_value(const dcm::FitResult& fit, const std::string& key,
                             const std::string& fallback) {
  for (const auto& [k, v] : fit.provenance)
    if (k == key) return v;
  return fallback;
}

// ---------------------------------------------------------------------------
// simulate

void cmd_simulate(const SimulateOpts& o, Run& run) {
  run.config() = {{"kind", o.kind},       {"n", o.n},           {"eval_n", o.eval_n},
                  {"n_items", o.n_items}, {"radius", o.radius}, {"half_width", o.half_width},
                  {"gamma0", o.gamma0},   {"gamma1", o.gamma1}, {"k_min", o.k_min},
                  {"k_max", o.k_max},     {"preamble_capture", !o.no_preamble_capture},
                  {"beta", o.beta},       {"lengthscale", o.lengthscale}};
  const dcm::Rng rng(run.seed());
  std::function<dcm::Dataset(int, const dcm::Rng&, const std::string&)> make;
  if (o.kind == "spatial") {
    dcm::SpatialConfig cfg;
    cfg.n_items = o.n_items;
    cfg.radius = o.radius;
    cfg.half_width = o.half_width;
    cfg.gamma0 = o.gamma0;
    cfg.gamma1 = o.gamma1;
    cfg.validate();
    make = [cfg](int n, const dcm::Rng& r, const std::string& p) { return dcm::spatial_dataset(cfg, n, r, p); };
  } else if (o.kind == "lora") {
    dcm::LoraCampaignConfig cfg;
    cfg.k_min = o.k_min;
    cfg.k_max = o.k_max;
    cfg.rule.preamble_capture = !o.no_preamble_capture;
    cfg.validate();
    make = [cfg](int n, const dcm::Rng& r, const std::string& p) { return dcm::lora_dataset(cfg, n, r, p); };
  } else {
    const int d = static_cast<int>(o.beta.size());
    std::vector<int> cols(static_cast<std::size_t>(d));
    std::iota(cols.begin(), cols.end(), 0);
    dcm::ModelParams truth;
    truth.beta = Eigen::Map<const dcm::Vector>(o.beta.data(), d);
    truth.log_lengthscales = dcm::Vector::Constant(1, std::log(o.lengthscale));
    truth.layout = {cols, cols, std::vector<int>(static_cast<std::size_t>(d), 0)};
    truth.validate();
    const int n_items = o.n_items;
    make = [truth, n_items](int n, const dcm::Rng& r, const std::string& p) {
      dcm::Dataset data = dcm::determinantal_dataset(truth, n, n_items, r);
      for (std::size_t k = 0; k < data.observations.size(); ++k)
        data.observations[k].id = p + "-" + std::to_string(k);
      return data;
    };
  }
  const dcm::Dataset train = make(o.n, rng.derive(0), "train");
  run.output("data.jsonl", dcm::io::dataset_to_jsonl(train));
  if (o.eval_n > 0) run.output("eval.jsonl", dcm::io::dataset_to_jsonl(make(o.eval_n, rng.derive(1), "eval")));
  std::cout << "simulated " << train.size() << " observations";
  if (o.eval_n > 0) std::cout << " (+" << o.eval_n << " eval)";
  std::cout << "\n";
}

// ---------------------------------------------------------------------------
// fit

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string fit_summary_csv(const dcm::io::FitArtifact& a, const dcm::PosteriorChains* chains) {
  std::ostringstream csv;
  const auto names = a.schema.parameter_names();
  const dcm::Vector theta = a.fit.params.packed();
  std::vector<std::string> pnames;
  if (a.fit.model == "determinantal") {
    pnames = names;
  } else {
    for (int q : a.fit.params.layout.quality_features) pnames.push_back(a.schema.names[static_cast<std::size_t>(q)]);
  }
  if (chains == nullptr) {
    csv << "parameter,estimate,sd\n";
    for (Eigen::Index p = 0; p < theta.size(); ++p) {
      const double var = p < a.fit.covariance.rows() ? a.fit.covariance(p, p) : NAN;
      csv << pnames[static_cast<std::size_t>(p)] << "," << fmt17(theta[p]) << ","
          << fmt17(var >= 0 ? std::sqrt(var) : NAN) << "\n";
    }
    return csv.str();
  }
  csv << "parameter,map,mean,sd,q2.5,q97.5,ess,rhat\n";
  for (int p = 0; p < chains->dim; ++p) {
    std::vector<double> pooled;
    for (const auto& c : chains->parameter(p)) pooled.insert(pooled.end(), c.begin(), c.end());
    csv << pnames[static_cast<std::size_t>(p)] << "," << fmt17(theta[p]) << ","
        << fmt17(a.posterior_mean[p]) << "," << fmt17(a.posterior_sd[p]) << ","
        << fmt17(quantile(pooled, 0.025)) << "," << fmt17(quantile(pooled, 0.975)) << ","
        << fmt17(a.diagnostics ? a.diagnostics->ess[p] : NAN) << ","
        << fmt17(a.diagnostics ? a.diagnostics->rhat[p] : NAN) << "\n";
  }
  return csv.str();
}

void print_csv_table(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    bool first = true;
    while (std::getline(cells, cell, ',')) {
      if (first) {
        std::printf("%-16s", cell.c_str());
        first = false;
      } else {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end != cell.c_str() && *end == '\0')
          std::printf(" %10.4g", v);
        else
          std::printf(" %10s", cell.c_str());
      }
    }
    std::printf("\n");
  }
}

dcm::Dataset load_dataset(const std::string& path, Run& run) {
  if (!fs::exists(path)) throw dcm::DataError("no such file: " + path);
  run.input(path);
  return dcm::io::read_dataset(path);
}

void cmd_fit(const FitOpts& o, Run& run) {
  run.config() = {{"data", o.data},         {"method", o.method},   {"similarity", o.similarity},
                  {"multi", o.multi},       {"chains", o.chains},   {"warmup", o.warmup},
                  {"steps", o.steps},       {"max_iter", o.max_iter}, {"beta_sd", o.beta_sd},
                  {"loglen_sd", o.loglen_sd}};
  const dcm::SimilarityMode mode = similarity_mode(o.similarity);
  const dcm::Dataset raw = load_dataset(o.data, run);
  if (raw.empty()) throw dcm::DataError(o.data + ": no observations");

  dcm::io::FitArtifact art;
  art.method = o.method;
  art.schema = raw.schema;
  art.standardization = raw.standardization ? *raw.standardization : dcm::compute_standardization(raw);
  const dcm::Dataset data = raw.standardization ? raw : dcm::standardized(raw, art.standardization);

  dcm::PriorSpec priors = dcm::PriorSpec::defaults(data.schema.layout);
  priors.beta_sd.setConstant(o.beta_sd);
  priors.loglen_sd.setConstant(o.loglen_sd);
  dcm::OptConfig opt;
  opt.max_iterations = o.max_iter;

  std::optional<dcm::PosteriorChains> chains;
  if (o.method == "logistic" || o.method == "mnl") {
    const auto kind = o.method == "logistic" ? dcm::BaselineKind::Logistic : dcm::BaselineKind::Mnl;
    const auto policy = o.multi == "split" ? dcm::MultiChoicePolicy::SplitSingletons
                                           : dcm::MultiChoicePolicy::Reject;
    art.fit = dcm::fit_baseline(kind, data, priors, opt, policy);
  } else {
    art.fit = dcm::map_fit(data, priors, opt, mode);
    art.fit.provenance.emplace_back("similarity", o.similarity);
    if (o.method == "mcmc") {
      dcm::McmcConfig mc;
      mc.chains = o.chains;
      mc.warmup = o.warmup;
      mc.steps = o.steps;
      chains = dcm::adaptive_mh(data, priors, mc, dcm::Rng(run.seed()), mode, opt);
      art.posterior_mean = chains->mean();
      art.posterior_sd = chains->sd();
      if (chains->n_chains >= 2 && chains->n_steps >= 100) art.diagnostics = dcm::diagnostics(*chains);
    }
  }

  run.output_json("fit.json", dcm::io::fit_to_json(art));
  const std::string summary = fit_summary_csv(art, chains ? &*chains : nullptr);
  run.output("summary.csv", summary);
  if (chains) run.output_json("chains.json", dcm::io::chains_to_json(*chains));

  std::cout << art.fit.model << " fit (" << o.method << "), " << data.size() << " observations, log posterior "
            << art.fit.log_posterior << (art.fit.converged ? "" : " [not converged]") << "\n";
  print_csv_table(summary);
  if (chains) {
    std::cout << "acceptance rates:";
    for (double a : chains->acceptance_rates) std::cout << " " << a;
    std::cout << "\n";
  }
}

// ---------------------------------------------------------------------------
// verify

bool cmd_verify(const VerifyOpts& o, Run& run) {
  run.config() = {{"trials", o.trials}, {"draws", o.draws}, {"inject_fault", o.inject_fault}};
  dcm::VerifyOptions vo;
  vo.seed = run.seed();
  vo.trials = o.trials;
  vo.draws = o.draws;
  vo.inject_fault = o.inject_fault;
  const dcm::VerifyReport report = dcm::run_verification(vo);
  run.output_json("verify.json", report.to_json());
  json failing = json::array();
  for (const auto& c : report.checks) {
    std::printf("%-6s %-26s", c.passed() ? "PASS" : "FAIL", c.name.c_str());
    for (const auto& m : c.metrics)
      std::printf("  %s=%.3g (tol %.3g)", m.name.c_str(), m.max_deviation, m.tolerance);
    std::printf("\n");
    if (!c.passed()) failing.push_back(c.failing_instance);
  }
  if (!failing.empty()) run.output_json("failing_instance.json", failing);
  return report.passed();
}

// ---------------------------------------------------------------------------
// sweep

bool cmd_sweep(const SweepOpts& o, Run& run) {
  run.config() = {{"radii", o.radii},   {"n_train", o.n_train}, {"n_eval", o.n_eval},
                  {"draws", o.draws},   {"method", o.method},   {"chains", o.chains},
                  {"warmup", o.warmup}, {"steps", o.steps},     {"ci", o.ci}};
  dcm::SweepConfig cfg;
  cfg.radii = o.radii;
  cfg.n_train = o.n_train;
  cfg.n_eval = o.n_eval;
  cfg.n_draws = o.draws;
  cfg.method = o.method == "mcmc" ? dcm::FitMethod::Mcmc : dcm::FitMethod::Map;
  cfg.mcmc.chains = o.chains;
  cfg.mcmc.warmup = o.warmup;
  cfg.mcmc.steps = o.steps;
  cfg.ci = ci_method(o.ci);
  const dcm::SweepReport report = dcm::run_sweep_experiment(cfg, dcm::Rng(run.seed()));
  run.output("sweep.csv", report.to_csv());
  run.output("sweep.json", report.to_json());
  std::printf("%8s %-14s %8s %8s\n", "radius", "model", "mcc", "ci_half");
  for (const auto& r : report.rows)
    std::printf("%8.3g %-14s %8.4f %8.4f\n", r.radius, r.model.c_str(), r.mcc_mean, r.ci_half);
  for (const auto& f : report.failures) std::cerr << "failure: " << f << "\n";
  return report.failures.empty();
}

// ---------------------------------------------------------------------------
// predict / evaluate

struct Loaded {
  dcm::io::FitArtifact art;
  dcm::Dataset eval;
  std::optional<dcm::PosteriorChains> chains;
};

Loaded load_fit_and_data(const PredictOpts& o, Run& run) {
  Loaded l;
  if (!fs::exists(o.fit)) throw dcm::DataError("no such file: " + o.fit);
  run.input(o.fit);
  l.art = dcm::io::fit_from_json(dcm::io::read_json(o.fit));
  const dcm::Dataset raw = load_dataset(o.data, run);
  if (raw.empty()) throw dcm::DataError(o.data + ": no observations");
  dcm::io::check_same_schema(l.art.schema, raw.schema);
  if (raw.standardization) {
    if (raw.standardization->mean != l.art.standardization.mean ||
        raw.standardization->sd != l.art.standardization.sd)
      throw dcm::DataError(o.data + ": standardized with constants that differ from the fit's");
    l.eval = raw;
  } else {
    l.eval = dcm::standardized(raw, l.art.standardization);
  }
  if (!o.chains.empty()) {
    if (!fs::exists(o.chains)) throw dcm::DataError("no such file: " + o.chains);
    run.input(o.chains);
    l.chains = dcm::io::chains_from_json(dcm::io::read_json(o.chains));
  }
  return l;
}

std::optional<dcm::BaselineKind> baseline_kind(const dcm::io::FitArtifact& a) {
  if (a.fit.model == "logistic") return dcm::BaselineKind::Logistic;
  if (a.fit.model == "mnl") return dcm::BaselineKind::Mnl;
  return std::nullopt;
}

void cmd_predict(const PredictOpts& o, Run& run) {
  run.config() = {{"fit", o.fit},     {"data", o.data},
                  {"chains", o.chains}, {"draws", o.draws},
                  {"override_gate", o.override_gate}, {"rhat_gate", o.rhat_gate}};
  if (o.draws < 1) throw Exit{kExitUsage, "--draws must be positive"};
  const Loaded l = load_fit_and_data(o, run);
  const dcm::Rng rng(run.seed());
  std::vector<dcm::Prediction> preds;
  if (const auto kind = baseline_kind(l.art)) {
    for (int k = 0; k < o.draws; ++k) {
      dcm::Rng r = rng.derive(static_cast<std::uint64_t>(k));
      for (const auto& obs : l.eval.observations)
        preds.push_back({obs.id, k,
                         dcm::baseline_predict(*kind, l.art.fit.params.beta,
                                               dcm::quality_features(obs.items, l.eval.schema.layout), r)});
    }
  } else {
    const dcm::PosteriorChains chains =
        l.chains ? *l.chains : dcm::PosteriorChains::point_mass(l.art.fit.params);
    const auto mode = similarity_mode(provenance_value(l.art.fit, "similarity", "rbf"));
    preds = dcm::posterior_predict(l.eval, chains, rng, o.draws, {o.rhat_gate, o.override_gate}, mode);
  }
  std::map<std::string, const dcm::Observation*> by_id;
  for (const auto& obs : l.eval.observations) by_id[obs.id] = &obs;
  std::string out;
  for (const auto& p : preds) {
    const dcm::Observation& obs = *by_id.at(p.observation_id);
    json items = json::array();
    for (int i : p.chosen)
      items.push_back(obs.items.ids.empty() ? std::to_string(i) : obs.items.ids[static_cast<std::size_t>(i)]);
    json line;
    line["id"] = p.observation_id;
    line["draw"] = p.draw;
    line["chosen"] = items;
    out += line.dump() + "\n";
  }
  run.output("predictions.jsonl", out);
  std::cout << preds.size() << " predictions for " << l.eval.size() << " observations\n";
}

void cmd_evaluate(const PredictOpts& o, Run& run) {
  run.config() = {{"fit", o.fit},     {"data", o.data},
                  {"chains", o.chains}, {"draws", o.draws},
                  {"override_gate", o.override_gate}, {"rhat_gate", o.rhat_gate},
                  {"ci", o.ci}};
  if (o.draws < 1) throw Exit{kExitUsage, "--draws must be positive"};
  const Loaded l = load_fit_and_data(o, run);
  dcm::Predictor predictor;
  if (const auto kind = baseline_kind(l.art)) {
    predictor = dcm::baseline_predictor(*kind, l.art.fit.params.beta);
  } else {
    const dcm::PosteriorChains chains =
        l.chains ? *l.chains : dcm::PosteriorChains::point_mass(l.art.fit.params);
    dcm::check_rhat_gate(chains, {o.rhat_gate, o.override_gate});
    predictor = dcm::determinantal_predictor(chains, similarity_mode(provenance_value(l.art.fit, "similarity", "rbf")));
  }
  const dcm::ModelScore s =
      dcm::evaluate_model(predictor, l.eval, o.draws, dcm::Rng(run.seed()), ci_method(o.ci));
  json j;
  j["model"] = l.art.fit.model;
  j["method"] = l.art.method;
  j["mcc_mean"] = num(s.mean);
  j["ci_half"] = num(s.ci_half);
  j["n"] = s.n;
  j["draws"] = o.draws;
  j["ci"] = o.ci;
  run.output_json("scores.json", j);
  run.output("scores.csv", "model,mcc_mean,ci_half,n\n" + l.art.fit.model + "," + fmt17(s.mean) + "," +
                               fmt17(s.ci_half) + "," + std::to_string(s.n) + "\n");
  std::printf("%s: MCC %.4f +/- %.4f over %d observations\n", l.art.fit.model.c_str(), s.mean, s.ci_half, s.n);
}

// ---------------------------------------------------------------------------
// Driver

int run_command(std::vector<std::string> args);

std::vector<std::string> strip_option(const std::vector<std::string>& args, const std::string& flag) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag) {
      ++i;
      continue;
    }
    if (args[i].rfind(flag + "=", 0) == 0) continue;
    out.push_back(args[i]);
  }
  return out;
}

int cmd_replay(const ReplayOpts& o, const std::string& out) {
  if (!fs::exists(o.manifest)) throw dcm::DataError("no such file: " + o.manifest);
  const dcm::io::RunManifest m = dcm::io::manifest_from_json(dcm::io::read_json(o.manifest));
  if (m.command == "replay" || m.argv.empty()) throw dcm::DataError(o.manifest + ": nothing to replay");
  const fs::path target = fs::absolute(out);
  const fs::path original_dir = fs::absolute(fs::path(o.manifest)).parent_path();
  if (fs::exists(target) && fs::equivalent(target, original_dir))
    throw Exit{kExitUsage, "replay --out must differ from the original run directory"};

  const fs::path cwd = fs::current_path();
  const std::string wd = m.config.value("working_directory", std::string{});
  if (!wd.empty()) fs::current_path(wd);
  for (const auto& [path, sha] : m.inputs) {
    if (!fs::exists(path)) throw dcm::DataError("replay input missing: " + path);
    if (dcm::io::sha256_file(path) != sha) throw dcm::DataError("replay input changed since the run: " + path);
  }
  std::vector<std::string> args = strip_option(strip_option(m.argv, "--seed"), "--out");
  args.insert(args.end(), {"--seed", std::to_string(m.seed), "--out", target.string()});
  const int rc = run_command(args);
  fs::current_path(cwd);

  const dcm::io::RunManifest again = dcm::io::manifest_from_json(dcm::io::read_json(target / "manifest.json"));
  bool same = again.outputs.size() == m.outputs.size();
  json report;
  report["manifest"] = o.manifest;
  report["exit_code"] = rc;
  json files = json::array();
  for (const auto& [name, sha] : m.outputs) {
    std::string now = "missing";
    for (const auto& [n2, s2] : again.outputs)
      if (n2 == name) now = s2;
    const bool match = now == sha;
    same = same && match;
    files.push_back({{"file", name}, {"expected", sha}, {"actual", now}, {"match", match}});
    std::printf("%-6s %s\n", match ? "MATCH" : "DIFFER", name.c_str());
  }
  report["files"] = files;
  report["reproduced"] = same;
  dcm::io::write_json(target / "replay.json", report);
  if (!same) {
    std::cerr << "replay: outputs differ from the manifest\n";
    return kExitVerify;
  }
  std::cout << "replay: all " << m.outputs.size() << " outputs reproduced\n";
  return kExitOk;
}

int run_command(std::vector<std::string> args) {
  CLI::App app{"Determinantal subset-choice models: simulate, fit, verify and evaluate.", "dcm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dcm::io::kArtifactVersion);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "RNG seed (default: $DCM_SEED, else 0)");
    sub->add_option("--out", common.out, "Run directory for outputs and manifest.json")->capture_default_str();
  };

  SimulateOpts sim;
  auto* s_sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  s_sim->add_option("--kind", sim.kind, "spatial, lora or determinantal")
      ->check(CLI::IsMember({"spatial", "lora", "determinantal"}))
      ->capture_default_str();
  s_sim->add_option("--n", sim.n, "Observations")->check(CLI::PositiveNumber)->capture_default_str();
  s_sim->add_option("--eval-n", sim.eval_n, "Held-out observations (eval.jsonl)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_sim->add_option("--n-items", sim.n_items, "Items per assortment (spatial, determinantal)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_sim->add_option("--radius", sim.radius, "Hard-core radius")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_sim->add_option("--half-width", sim.half_width)->capture_default_str();
  s_sim->add_option("--gamma0", sim.gamma0)->capture_default_str();
  s_sim->add_option("--gamma1", sim.gamma1)->capture_default_str();
  s_sim->add_option("--k-min", sim.k_min, "Fewest devices (lora)")->capture_default_str();
  s_sim->add_option("--k-max", sim.k_max, "Most devices (lora)")->capture_default_str();
  s_sim->add_flag("--no-preamble-capture", sim.no_preamble_capture, "Earliest arrival always locks (lora)");
  s_sim->add_option("--beta", sim.beta, "Quality coefficients (determinantal)")->delimiter(',');
  s_sim->add_option("--lengthscale", sim.lengthscale, "Shared lengthscale (determinantal)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(s_sim);

  FitOpts fit;
  auto* s_fit = app.add_subcommand("fit", "Fit a model to a JSONL dataset");
  s_fit->add_option("--data", fit.data, "Training dataset (JSONL)")->required();
  s_fit->add_option("--method", fit.method, "map, mcmc, logistic or mnl")
      ->check(CLI::IsMember({"map", "mcmc", "logistic", "mnl"}))
      ->capture_default_str();
  s_fit->add_option("--similarity", fit.similarity, "rbf, identity or allones")
      ->check(CLI::IsMember({"rbf", "identity", "allones"}))
      ->capture_default_str();
  s_fit->add_option("--multi", fit.multi, "MNL handling of multi-item choices: reject or split")
      ->check(CLI::IsMember({"reject", "split"}))
      ->capture_default_str();
  s_fit->add_option("--chains", fit.chains)->check(CLI::PositiveNumber)->capture_default_str();
  s_fit->add_option("--warmup", fit.warmup)->check(CLI::NonNegativeNumber)->capture_default_str();
  s_fit->add_option("--steps", fit.steps)->check(CLI::PositiveNumber)->capture_default_str();
  s_fit->add_option("--max-iter", fit.max_iter)->check(CLI::PositiveNumber)->capture_default_str();
  s_fit->add_option("--beta-sd", fit.beta_sd, "Prior sd of quality coefficients")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_fit->add_option("--loglen-sd", fit.loglen_sd, "Prior sd of log lengthscales")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(s_fit);

  VerifyOpts ver;
  auto* s_ver = app.add_subcommand("verify", "Run the numerical equivalence checks");
  s_ver->add_option("--trials", ver.trials, "Trials per check (0: defaults)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_ver->add_option("--draws", ver.draws, "Sampler draws per kernel")->check(CLI::PositiveNumber)->capture_default_str();
  s_ver->add_flag("--inject-fault", ver.inject_fault, "Harness self-test: corrupt one check");
  add_common(s_ver);

  SweepOpts sw;
  auto* s_sw = app.add_subcommand("sweep", "Radius sweep comparing the three models");
  s_sw->add_option("--radii", sw.radii)->delimiter(',')->check(CLI::NonNegativeNumber);
  s_sw->add_option("--n-train", sw.n_train)->check(CLI::PositiveNumber)->capture_default_str();
  s_sw->add_option("--n-eval", sw.n_eval)->check(CLI::PositiveNumber)->capture_default_str();
  s_sw->add_option("--draws", sw.draws)->check(CLI::PositiveNumber)->capture_default_str();
  s_sw->add_option("--method", sw.method)->check(CLI::IsMember({"map", "mcmc"}))->capture_default_str();
  s_sw->add_option("--chains", sw.chains)->check(CLI::PositiveNumber)->capture_default_str();
  s_sw->add_option("--warmup", sw.warmup)->check(CLI::NonNegativeNumber)->capture_default_str();
  s_sw->add_option("--steps", sw.steps)->check(CLI::PositiveNumber)->capture_default_str();
  s_sw->add_option("--ci", sw.ci)->check(CLI::IsMember({"normal", "bootstrap"}))->capture_default_str();
  add_common(s_sw);

  PredictOpts pr;
  auto* s_pr = app.add_subcommand("predict", "Sample predicted choices for a dataset");
  auto* s_ev = app.add_subcommand("evaluate", "Score a fitted model by MCC");
  for (auto* s : {s_pr, s_ev}) {
    s->add_option("--fit", pr.fit, "fit.json from dcm fit")->required();
    s->add_option("--data", pr.data, "Evaluation dataset (JSONL)")->required();
    s->add_option("--chains", pr.chains, "chains.json from an mcmc fit");
    s->add_option("--rhat-gate", pr.rhat_gate)->capture_default_str();
    s->add_flag("--override-gate", pr.override_gate, "Use chains even if R-hat exceeds the gate");
    add_common(s);
  }
  s_pr->add_option("--draws", pr.draws, "Posterior draws")->check(CLI::PositiveNumber)->capture_default_str();
  pr.draws = 1;
  s_ev->add_option("--draws", pr.draws, "Posterior draws (default 200)")->check(CLI::PositiveNumber);
  s_ev->add_option("--ci", pr.ci)->check(CLI::IsMember({"normal", "bootstrap"}))->capture_default_str();

  ReplayOpts rep;
  auto* s_rep = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  s_rep->add_option("--manifest", rep.manifest, "manifest.json of an earlier run")->required();
  s_rep->add_option("--out", common.out, "Run directory for the replay")->required();

  std::vector<const char*> cargv{"dcm"};
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (s_ev->parsed() && s_ev->count("--draws") == 0) pr.draws = 200;
  if (s_rep->parsed()) return cmd_replay(rep, common.out);

  std::uint64_t seed = 0;
  if (common.seed) {
    seed = parse_seed(*common.seed, "--seed");
  } else if (const char* env = std::getenv("DCM_SEED"); env != nullptr && *env != '\0') {
    seed = parse_seed(env, "DCM_SEED");
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), args, common.out, seed);
  bool ok = true;
  if (sub == s_sim) cmd_simulate(sim, run);
  if (sub == s_fit) cmd_fit(fit, run);
  if (sub == s_ver) ok = cmd_verify(ver, run);
  if (sub == s_sw) ok = cmd_sweep(sw, run);
  if (sub == s_pr) cmd_predict(pr, run);
  if (sub == s_ev) cmd_evaluate(pr, run);
  run.config()["working_directory"] = fs::current_path().string();
  run.finish();
  if (!ok) return sub == s_ver ? kExitVerify : kExitData;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run_command(args);
  } catch (const Exit& e) {
    std::cerr << "dcm: " << e.message << "\n";
    return e.code;
  } catch (const dcm::ArgumentError& e) {
    std::cerr << "dcm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dcm::ValidationError& e) {
    std::cerr << "dcm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dcm::Error& e) {
    std::cerr << "dcm: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "dcm: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "dcm: malformed JSON: " << e.what() << "\n";
    return kExitData;
  }
}
