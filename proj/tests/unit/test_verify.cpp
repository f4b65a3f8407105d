#include "doctest.h"

#include "dcm/verify.hpp"

using namespace dcm;

TEST_CASE("verification suite passes at reduced size") {
  VerifyOptions opt;
  opt.seed = 11;
  opt.trials = 5;
  const auto report = run_verification(opt);
  CHECK(report.checks.size() == 6u);
  for (const auto& c : report.checks) {
    INFO(c.name);
    CHECK(c.passed());
    CHECK(c.failing_instance.is_null());
  }
  CHECK(report.passed());
  const auto j = report.to_json();
  CHECK(j["passed"] == true);
}

TEST_CASE("injected fault is detected and the instance recorded") {
  VerifyOptions opt;
  opt.seed = 11;
  opt.trials = 3;
  opt.draws = 2000;
  opt.inject_fault = true;
  const auto report = run_verification(opt);
  CHECK_FALSE(report.passed());
  bool recorded = false;
  for (const auto& c : report.checks)
    if (!c.passed()) recorded = recorded || c.failing_instance.contains("instance");
  CHECK(recorded);
}

TEST_CASE("individual checks detect faults") {
  const Rng r(12);
  CheckSize s{3, 20000};
  CHECK(check_normalizer(r, s).passed());
  CHECK_FALSE(check_normalizer(r, s, true).passed());
  CHECK(check_spectral_sampler(r, s).passed());
  CHECK_FALSE(check_spectral_sampler(r, s, true).passed());
  CHECK(check_mnl_limit(r, s).passed());
  CHECK_FALSE(check_mnl_limit(r, s, true).passed());
  CHECK(check_logistic_limit(r, s).passed());
  CHECK_FALSE(check_logistic_limit(r, s, true).passed());
  CHECK(check_gradient(r, s).passed());
  CHECK_FALSE(check_gradient(r, s, true).passed());
}

TEST_CASE("decomposition fault fails even with one trial") {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK_FALSE(check_additive_decomposition(Rng(seed), {1, 0}, true).passed());
}
