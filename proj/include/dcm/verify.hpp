#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dcm/rng.hpp"

namespace dcm {

/// One measured quantity of a check and the bound it must stay within.
struct CheckMetric {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_deviation <= tolerance; }
};

struct CheckResult {
  std::string name;
  int trials = 0;
  std::vector<CheckMetric> metrics;
  /// The first instance that broke a bound (null when every trial passed).
  /// Includes the seed path so the instance can be regenerated.
  nlohmann::ordered_json failing_instance;
  double seconds = 0.0;

  bool passed() const;
};

/// Per-check sizes. Zero trials means the check's own default.
struct CheckSize {
  int trials = 0;
  int draws = 100000;  // sampler checks only
};

// Each check draws trial t from rng.derive(t). `inject_fault` flips the sign
// of a quantity under test.

/// sum_B det(L_B) against det(I + L) by Cholesky, random PSD L with n in 1..10.
/// Default 200 trials, relative error <= 1e-8.
CheckResult check_normalizer(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

/// Gumbel-perturbed subset utilities against the enumerated pmf, n <= 5.
/// Default 20 kernels, TV <= 0.02.
CheckResult check_rum_equivalence(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

/// log det(L_C) = sum 2 log q_i + log det(S_C) within 1e-9 and log det(S_C) <= 1e-12.
/// Default 1000 (kernel, subset) pairs, drawn with reciprocal condition of S_C
/// at least 1e-6.
CheckResult check_additive_decomposition(const Rng& rng, CheckSize size = {},
                                         bool inject_fault = false);

/// Identity similarity reproduces the logistic likelihood within 1e-9, and an
/// RBF with lengthscale 1e-3 times the smallest item distance is within 1e-6
/// in TV of the independent-label pmf. Default 100 instances.
CheckResult check_logistic_limit(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

/// All-ones similarity: every |C| >= 2 has probability <= 1e-10 and singletons
/// and the empty set match MNL within 1e-9. Default 100 instances.
CheckResult check_mnl_limit(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

/// Analytic beta-gradient against central differences, relative error <= 1e-5.
/// Default 50 (params, dataset) instances.
CheckResult check_gradient(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

/// Spectral sampler against the enumerated pmf, n = 4. Default 10 kernels, TV <= 0.02.
CheckResult check_spectral_sampler(const Rng& rng, CheckSize size = {}, bool inject_fault = false);

struct VerifyOptions {
  std::uint64_t seed = 0;
  int trials = 0;  // 0: per-check defaults
  int draws = 100000;
  /// Flip a sign inside the decomposition check (harness self-test).
  bool inject_fault = false;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const;
  nlohmann::ordered_json to_json() const;
};

/// Normalizer, RUM equivalence, additive decomposition, logistic limit, MNL
/// limit and gradient checks; check k uses rng.derive(k).
VerifyReport run_verification(const VerifyOptions& options);

}  // namespace dcm
