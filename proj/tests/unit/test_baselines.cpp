#include "doctest.h"

#include <cmath>
#include <limits>

#include "dcm/baselines.hpp"
#include "dcm/errors.hpp"
#include "dcm/likelihood.hpp"
#include "oracles.hpp"

using namespace dcm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Dataset logistic_data(const Vector& beta, int n_obs, int n_items, Rng& r) {
  Dataset data;
  data.schema.names = {"a", "b"};
  data.schema.layout = KernelLayout::all_features(2);
  for (int k = 0; k < n_obs; ++k) {
    Observation o;
    o.id = std::to_string(k);
    o.items.features = Matrix(n_items, 2);
    std::vector<int> chosen;
    for (int i = 0; i < n_items; ++i) {
      o.items.features(i, 0) = r.normal();
      o.items.features(i, 1) = r.normal();
      if (r.bernoulli(oracle::sigmoid(beta.dot(o.items.features.row(i).transpose()))))
        chosen.push_back(i);
    }
    o.chosen = SubsetIndex(chosen);
    data.observations.push_back(std::move(o));
  }
  return data;
}

}  // namespace

TEST_CASE("logistic likelihood: examples") {
  const Matrix X = Matrix::Random(2, 3);
  for (std::uint64_t m = 0; m < 4; ++m)
    CHECK(logistic_log_likelihood(Vector::Zero(3), X, SubsetIndex::from_mask(m, 2)) ==
          doctest::Approx(std::log(0.25)));
  Matrix x1(1, 1);
  x1 << std::log(3.0);
  CHECK(logistic_log_likelihood(vec({1}), x1, SubsetIndex{0}) == doctest::Approx(std::log(0.75)));
}

TEST_CASE("mnl likelihood: examples") {
  const Matrix X = Matrix::Random(2, 2);
  CHECK(mnl_log_likelihood(Vector::Zero(2), X, SubsetIndex{0}) == doctest::Approx(std::log(1.0 / 3)));
  CHECK(mnl_log_likelihood(Vector::Zero(2), X, SubsetIndex{}) == doctest::Approx(std::log(1.0 / 3)));
  CHECK(mnl_log_likelihood(Vector::Zero(2), X, SubsetIndex{0, 1}) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("likelihoods stay finite for utilities near 700") {
  Matrix X(2, 1);
  X << 700, -700;
  CHECK(std::isfinite(mnl_log_likelihood(vec({1}), X, SubsetIndex{1})));
  CHECK(mnl_log_likelihood(vec({1}), X, SubsetIndex{0}) == doctest::Approx(0.0));
  CHECK(std::isfinite(logistic_log_likelihood(vec({1}), X, SubsetIndex{1})));
  CHECK(logistic_log_likelihood(vec({1}), X, SubsetIndex{0}) == doctest::Approx(0.0));
  CHECK(softplus(800) == doctest::Approx(800));
  CHECK(softplus(-800) >= 0.0);
}

TEST_CASE("determinantal limits reproduce the baselines") {
  Rng root(3);
  for (int t = 0; t < 100; ++t) {
    Rng r = root.derive(static_cast<std::uint64_t>(t));
    const int n = static_cast<int>(r.uniform_int(1, 6));
    Assortment a;
    a.features = Matrix(n, 2);
    for (int i = 0; i < n; ++i) a.features.row(i) << r.normal(), r.normal();
    ModelParams p{vec({r.normal(), r.normal()}), vec({0, 0}), KernelLayout::all_features(2)};
    const auto C = SubsetIndex::from_mask(static_cast<std::uint64_t>(r.uniform_int(0, (1 << n) - 1)), n);
    CHECK(std::abs(subset_log_likelihood(build_kernel(p, a, similarity::Identity{}), C) -
                   logistic_log_likelihood(p.beta, a.features, C)) <= 1e-9);
    const auto ones = build_kernel(p, a, similarity::AllOnes{});
    if (C.size() <= 1) {
      CHECK(std::abs(subset_log_likelihood(ones, C) - mnl_log_likelihood(p.beta, a.features, C)) <= 1e-9);
    } else {
      CHECK(std::exp(subset_log_likelihood(ones, C)) <= 1e-10);
    }
  }
}

TEST_CASE("mnl IIA") {
  Rng r(4);
  const Vector beta = vec({0.4, -1.2});
  Matrix X(4, 2);
  for (int i = 0; i < 4; ++i) X.row(i) << r.normal(), r.normal();
  const double full = mnl_log_likelihood(beta, X, SubsetIndex{0}) - mnl_log_likelihood(beta, X, SubsetIndex{1});
  const double reduced = mnl_log_likelihood(beta, X.topRows(2), SubsetIndex{0}) -
                         mnl_log_likelihood(beta, X.topRows(2), SubsetIndex{1});
  CHECK(std::abs(full - reduced) <= 1e-12);
}

TEST_CASE("fit_baseline: logistic recovers the generating coefficients") {
  Rng r(5);
  const Vector truth = vec({1, -1});
  const Dataset data = logistic_data(truth, 1000, 5, r);
  const auto fit = fit_baseline(BaselineKind::Logistic, data, PriorSpec::defaults(data.schema.layout));
  CHECK(fit.converged);
  CHECK(fit.grad_norm <= 1e-5);
  CHECK(std::abs(fit.params.beta[0] - 1) <= 0.15);
  CHECK(std::abs(fit.params.beta[1] + 1) <= 0.15);
  CHECK(fit.model == "logistic");
}

TEST_CASE("fit_baseline: separable data stays finite under the prior") {
  Dataset data;
  data.schema.names = {"x"};
  data.schema.layout = KernelLayout::all_features(1);
  Observation o;
  o.items.features = Matrix(2, 1);
  o.items.features << 1, -1;
  o.chosen = SubsetIndex{0};
  data.observations.push_back(o);
  const auto fit = fit_baseline(BaselineKind::Logistic, data, PriorSpec::defaults(data.schema.layout));
  CHECK(std::isfinite(fit.params.beta[0]));
  CHECK(fit.params.beta[0] > 0);
}

TEST_CASE("fit_baseline: MNL and multi-item choices") {
  Rng r(6);
  const Dataset data = logistic_data(vec({0.5, 0.5}), 50, 5, r);
  const PriorSpec pr = PriorSpec::defaults(data.schema.layout);
  CHECK_THROWS_AS(fit_baseline(BaselineKind::Mnl, data, pr), DataError);
  const auto fit = fit_baseline(BaselineKind::Mnl, data, pr, {}, MultiChoicePolicy::SplitSingletons);
  CHECK(fit.converged);
  bool recorded = false;
  for (const auto& [k, v] : fit.provenance)
    if (v.find("singleton") != std::string::npos) recorded = true;
  CHECK(recorded);
}

TEST_CASE("baseline_predict") {
  Rng r(7);
  Matrix X(3, 1);
  X << 1, 1, 1;
  for (int k = 0; k < 100; ++k) {
    CHECK(baseline_predict(BaselineKind::Logistic, vec({-1e6}), X, r).empty());
    CHECK(baseline_predict(BaselineKind::Mnl, vec({2}), X, r).size() <= 1);
  }
  Matrix Y(2, 1);
  Y << 0.3, -1.1;
  const Vector beta = vec({1.5});
  const int draws = 50000;
  Vector hits = Vector::Zero(2);
  for (int k = 0; k < draws; ++k)
    for (int i : baseline_predict(BaselineKind::Logistic, beta, Y, r)) hits[i] += 1;
  for (int i = 0; i < 2; ++i) {
    const double p = oracle::sigmoid(beta[0] * Y(i, 0));
    CHECK(std::abs(hits[i] / draws - p) <= 3 * std::sqrt(p * (1 - p) / draws));
  }
}
