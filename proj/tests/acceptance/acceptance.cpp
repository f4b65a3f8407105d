// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   dcm_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dcm/evaluation.hpp"
#include "dcm/inference.hpp"
#include "dcm/io.hpp"
#include "dcm/simulation.hpp"
#include "dcm/verify.hpp"

using namespace dcm;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr std::uint64_t kVerifySeed = 0;
constexpr double kLimitNormalizerSeconds = 10;
constexpr double kLimitRumSeconds = 120;
constexpr double kLimitDecompositionSeconds = 5;
constexpr double kLimitLogisticSeconds = 30;
constexpr double kLimitMnlSeconds = 30;
constexpr double kLimitGradientSeconds = 60;
constexpr double kLimitSpectralSeconds = 120;

constexpr std::uint64_t kSweepSeed = 1;
constexpr double kSweepMatch = 0.05;
constexpr double kSweepGap = 0.05;
constexpr double kSweepSlack = 0.02;
constexpr double kLimitSweepSeconds = 30 * 60;

constexpr int kRecoverySeeds = 5;
constexpr int kRecoveryRequired = 4;
constexpr int kRecoveryN = 2000;
constexpr int kRecoveryItems = 10;
constexpr double kRecoveryBetaTol = 0.3;
constexpr double kRecoveryLogLenTol = 0.5;
constexpr double kLimitRecoverySeconds = 10 * 60;

constexpr int kLoraSeeds = 5;
constexpr int kLoraRequired = 4;
constexpr int kLoraN = 1000;
constexpr int kLoraChains = 4;
constexpr int kLoraWarmup = 1000;
constexpr int kLoraSteps = 2000;
constexpr double kLimitLoraSeconds = 15 * 60;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome from_check(const CheckResult& r, double limit_s) {
  Outcome o;
  std::ostringstream s;
  for (const auto& m : r.metrics)
    s << m.name << " " << fmt("%.3g", m.max_deviation) << " <= " << fmt("%.3g", m.tolerance) << "; ";
  s << r.trials << " trials, " << fmt("%.1f", r.seconds) << " s (limit " << limit_s << " s)";
  o.passed = r.passed() && r.seconds < limit_s;
  o.detail = s.str();
  return o;
}

Outcome criterion_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepConfig cfg;
  const SweepReport rep = run_sweep_experiment(cfg, Rng(kSweepSeed));
  const double secs = seconds_since(t0);
  if (!rep.failures.empty()) return {false, "fit failures: " + rep.failures.front()};
  auto mcc = [&](double r, const char* m) { return rep.find(r, m)->mcc_mean; };
  const double lo = cfg.radii.front(), hi = cfg.radii.back();

  const double a_det = mcc(lo, "determinantal"), a_log = mcc(lo, "logistic"), a_mnl = mcc(lo, "mnl");
  const bool a = std::abs(a_det - a_log) <= kSweepMatch && a_mnl <= std::min(a_det, a_log) - kSweepGap;
  const double b_det = mcc(hi, "determinantal"), b_log = mcc(hi, "logistic"), b_mnl = mcc(hi, "mnl");
  const bool b = std::abs(b_det - b_mnl) <= kSweepMatch && b_log <= std::min(b_det, b_mnl) - kSweepGap;
  bool c = true;
  double worst = 1.0;
  for (double r : cfg.radii) {
    const double margin = mcc(r, "determinantal") - std::max(mcc(r, "logistic"), mcc(r, "mnl")) + kSweepSlack;
    worst = std::min(worst, margin);
    c = c && margin >= 0;
  }
  std::ostringstream s;
  s << "(a) r=" << lo << " det " << fmt("%.3f", a_det) << " logit " << fmt("%.3f", a_log) << " mnl "
    << fmt("%.3f", a_mnl) << (a ? " ok" : " FAIL") << "; (b) r=" << hi << " det " << fmt("%.3f", b_det)
    << " logit " << fmt("%.3f", b_log) << " mnl " << fmt("%.3f", b_mnl) << (b ? " ok" : " FAIL")
    << "; (c) worst margin " << fmt("%.3f", worst) << (c ? " ok" : " FAIL") << "; "
    << fmt("%.0f", secs) << " s";
  return {a && b && c && secs < kLimitSweepSeconds, s.str()};
}

Outcome criterion_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelParams truth;
  truth.layout = {{0, 1}, {0, 1}, {0, 0}};
  truth.beta = Vector(2);
  truth.beta << 1, -1;
  truth.log_lengthscales = Vector::Constant(1, std::log(0.5));
  int hits = 0;
  std::ostringstream s;
  for (int k = 0; k < kRecoverySeeds; ++k) {
    const Dataset d = determinantal_dataset(truth, kRecoveryN, kRecoveryItems, Rng(1000 + k));
    const FitResult f = map_fit(d, PriorSpec::defaults(truth.layout));
    const double eb = (f.params.beta - truth.beta).cwiseAbs().maxCoeff();
    const double el = std::abs(f.params.log_lengthscales[0] - truth.log_lengthscales[0]);
    const bool ok = f.converged && eb <= kRecoveryBetaTol && el <= kRecoveryLogLenTol;
    hits += ok;
    s << "seed " << k << ": |db| " << fmt("%.3f", eb) << " |dlogl| " << fmt("%.3f", el) << (ok ? "" : " miss")
      << "; ";
  }
  const double secs = seconds_since(t0);
  s << hits << "/" << kRecoverySeeds << " within tolerance, " << fmt("%.0f", secs) << " s";
  return {hits >= kRecoveryRequired && secs < kLimitRecoverySeconds, s.str()};
}

Outcome criterion_lora() {
  const auto t0 = std::chrono::steady_clock::now();
  int hits = 0;
  std::ostringstream s;
  for (int k = 0; k < kLoraSeeds; ++k) {
    const Dataset raw = lora_dataset(LoraCampaignConfig{}, kLoraN, Rng(500 + k));
    const Dataset d = standardized(raw, compute_standardization(raw));
    const PriorSpec pr = PriorSpec::defaults(d.schema.layout);
    McmcConfig mc;
    mc.chains = kLoraChains;
    mc.warmup = kLoraWarmup;
    mc.steps = kLoraSteps;
    const PosteriorChains ch = adaptive_mh(d, pr, mc, Rng(900 + k));
    const Vector mean = ch.mean();
    const auto names = d.schema.parameter_names();
    int i_chsf = -1, i_pow = -1;
    for (int p = 0; p < static_cast<int>(names.size()); ++p) {
      if (names[static_cast<std::size_t>(p)] == "beta[ch_sf_overlap]") i_chsf = p;
      if (names[static_cast<std::size_t>(p)] == "beta[power]") i_pow = p;
    }
    if (i_chsf < 0 || i_pow < 0) return {false, "parameter names not found"};
    const double rhat = diagnostics(ch).rhat.maxCoeff();
    const bool ok = mean[i_chsf] < 0 && mean[i_pow] > 0;
    hits += ok;
    s << "seed " << k << ": ch_sf_overlap " << fmt("%.2f", mean[i_chsf]) << " power " << fmt("%.2f", mean[i_pow])
      << " max R-hat " << fmt("%.3f", rhat) << (ok ? "" : " miss") << "; ";
  }
  const double secs = seconds_since(t0);
  s << hits << "/" << kLoraSeeds << " with the expected signs, " << fmt("%.0f", secs) << " s";
  return {hits >= kLoraRequired && secs < kLimitLoraSeconds, s.str()};
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_replay() {
#ifndef DCM_CLI_PATH
  return {false, "built without the dcm command-line tool"};
#else
  const fs::path dir = fs::temp_directory_path() / "dcm_acceptance_replay";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = std::string("'") + DCM_CLI_PATH + "'";
  const std::string cd = "cd '" + dir.string() + "' && ";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"simulate", "simulate --n 60 --eval-n 20 --radius 0.3 --seed 3"},
      {"simulate_lora", "simulate --kind lora --n 40 --seed 4"},
      {"fit_map", "fit --data simulate/data.jsonl --seed 5"},
      {"fit_mcmc", "fit --data simulate/data.jsonl --method mcmc --chains 2 --warmup 200 --steps 200 --seed 6"},
      {"fit_logistic", "fit --data simulate/data.jsonl --method logistic"},
      {"fit_mnl", "fit --data simulate/data.jsonl --method mnl --multi split"},
      {"verify", "verify --trials 2 --draws 20000 --seed 7"},
      {"sweep", "sweep --radii 0.1,1.5 --n-train 30 --n-eval 10 --draws 5 --seed 8"},
      {"predict", "predict --fit fit_map/fit.json --data simulate/eval.jsonl --draws 3 --seed 9"},
      {"predict_mcmc",
       "predict --fit fit_mcmc/fit.json --chains fit_mcmc/chains.json --override-gate --data simulate/eval.jsonl "
       "--draws 3 --seed 10"},
      {"evaluate", "evaluate --fit fit_map/fit.json --data simulate/eval.jsonl --draws 20 --seed 11"},
      {"evaluate_mnl", "evaluate --fit fit_mnl/fit.json --data simulate/eval.jsonl --draws 20 --seed 12"},
  };
  int replayed = 0, files = 0;
  for (const auto& [name, args] : runs) {
    if (shell(cd + cli + " " + args + " --out " + name + " > /dev/null 2>&1") != 0)
      return {false, "command failed: dcm " + args};
    if (shell(cd + cli + " replay --manifest " + name + "/manifest.json --out replay_" + name + " > /dev/null 2>&1") != 0)
      return {false, "replay differs: dcm " + args};
    files += static_cast<int>(io::manifest_from_json(io::read_json(dir / name / "manifest.json")).outputs.size());
    ++replayed;
  }
  return {true, std::to_string(replayed) + " runs replayed, " + std::to_string(files) + " output files byte-identical"};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const Rng root(kVerifySeed);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"normalizer identity", [&] { return from_check(check_normalizer(root.derive(0)), kLimitNormalizerSeconds); }},
      {"RUM equivalence", [&] { return from_check(check_rum_equivalence(root.derive(1)), kLimitRumSeconds); }},
      {"additive decomposition",
       [&] { return from_check(check_additive_decomposition(root.derive(2)), kLimitDecompositionSeconds); }},
      {"logistic limit", [&] { return from_check(check_logistic_limit(root.derive(3)), kLimitLogisticSeconds); }},
      {"MNL limit", [&] { return from_check(check_mnl_limit(root.derive(4)), kLimitMnlSeconds); }},
      {"gradient", [&] { return from_check(check_gradient(root.derive(5)), kLimitGradientSeconds); }},
      {"spectral sampler", [&] { return from_check(check_spectral_sampler(root.derive(6)), kLimitSpectralSeconds); }},
      {"radius sweep ordering", criterion_sweep},
      {"parameter recovery", criterion_recovery},
      {"synthetic LoRa posterior signs", criterion_lora},
      {"manifest replay determinism", criterion_replay},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s %2d %s: %s\n", o.passed ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
