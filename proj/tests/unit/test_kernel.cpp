#include "doctest.h"

#include <cmath>

#include "dcm/errors.hpp"
#include "dcm/kernel.hpp"
#include "dcm/rng.hpp"

using namespace dcm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Assortment random_assortment(Rng& r, int n, int d) {
  Assortment a;
  a.features = Matrix(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) a.features(i, k) = r.normal();
  return a;
}

ModelParams params_for(int d, Rng& r) {
  ModelParams p;
  p.layout = KernelLayout::all_features(d);
  p.beta = Vector(d);
  p.log_lengthscales = Vector(d);
  for (int k = 0; k < d; ++k) {
    p.beta[k] = r.normal();
    p.log_lengthscales[k] = 0.5 * r.normal();
  }
  return p;
}

}  // namespace

TEST_CASE("quality: exp of half the linear index") {
  CHECK(quality(vec({0, 0}), vec({3, -1})) == 1.0);
  CHECK(quality(vec({2}), vec({1})) == doctest::Approx(std::exp(1.0)));
  CHECK(quality(vec({1, -1}), vec({0.3, 0.3})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(quality(vec({1}), vec({1, 2})), ArgumentError);
}

TEST_CASE("rbf_similarity: direct formula") {
  CHECK(rbf_similarity(vec({0.7, 3.0}), vec({1, 2}), vec({1, 2})) == 1.0);
  CHECK(rbf_similarity(vec({1}), vec({0}), vec({1})) == doctest::Approx(0.606531).epsilon(1e-6));
  CHECK(rbf_similarity(vec({1, 2}), vec({0, 0}), vec({1, 2})) ==
        doctest::Approx(0.367879).epsilon(1e-6));
  CHECK_THROWS_AS(rbf_similarity(vec({0}), vec({0}), vec({1})), ArgumentError);
}

TEST_CASE("build_kernel: two items with given similarity") {
  const double s = std::exp(-0.5);
  ModelParams p{vec({0}), vec({0}), KernelLayout::all_features(1)};
  Assortment a;
  a.features = Matrix(2, 1);
  a.features << 0, 1;
  const auto kb = build_kernel(p, a);
  CHECK(kb.L(0, 0) == 1.0);
  CHECK(kb.L(1, 1) == 1.0);
  CHECK(kb.L(0, 1) == doctest::Approx(s));
  CHECK(kb.L.determinant() == doctest::Approx(1 - s * s));
}

TEST_CASE("build_kernel: identity and all-ones modes") {
  Rng r(11);
  const auto a = random_assortment(r, 5, 3);
  const auto p = params_for(3, r);
  const auto id = build_kernel(p, a, similarity::Identity{});
  for (int i = 0; i < 5; ++i) {
    CHECK(id.L(i, i) == doctest::Approx(std::exp(p.beta.dot(a.features.row(i).transpose()))));
    for (int j = 0; j < 5; ++j)
      if (i != j) CHECK(id.L(i, j) == 0.0);
  }
  ModelParams zero{Vector::Zero(3), Vector::Zero(3), KernelLayout::all_features(3)};
  const auto ones = build_kernel(zero, a, similarity::AllOnes{});
  CHECK(ones.L == Matrix::Ones(5, 5));
  CHECK(Eigen::FullPivLU<Matrix>(ones.L).rank() == 1);
}

TEST_CASE("build_kernel: fixed mode is validated") {
  ModelParams p{vec({0}), vec({0}), KernelLayout::all_features(1)};
  Assortment a;
  a.features = Matrix::Zero(2, 1);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(build_kernel(p, a, similarity::Fixed{bad}), ValidationError);
  Matrix ok(2, 2);
  ok << 1, 0.3, 0.3, 1;
  CHECK(build_kernel(p, a, similarity::Fixed{ok}).L(0, 1) == doctest::Approx(0.3));
  CHECK_THROWS_AS(build_kernel(p, a, similarity::Fixed{Matrix::Identity(3, 3)}), ValidationError);
}

TEST_CASE("build_kernel: jitter keeps a unit diagonal") {
  ModelParams p{vec({0}), vec({5}), KernelLayout::all_features(1)};
  Assortment a;
  a.features = Matrix(2, 1);
  a.features << 0, 0.01;
  const auto kb = build_kernel(p, a, similarity::Rbf{0.1});
  CHECK(kb.S(0, 0) == doctest::Approx(1.0));
  CHECK(kb.S(0, 1) < 1.0 / 1.1 + 1e-12);
}

TEST_CASE("psd_check: analytic cases") {
  CHECK(psd_check(Matrix::Identity(3, 3)));
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  CHECK_FALSE(psd_check(m));
  CHECK(psd_check(Matrix::Ones(3, 3)));
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_FALSE(psd_check(asym));
  CHECK_THROWS_AS(psd_check(Matrix::Zero(2, 3)), ArgumentError);
}

TEST_CASE("layout: validation and parameter packing") {
  KernelLayout l;
  l.quality_features = {0, 1};
  l.similarity_features = {1, 2, 3};
  l.similarity_groups = {0, 0, 1};
  CHECK_NOTHROW(l.validate(4));
  CHECK(l.n_groups() == 2);
  CHECK_THROWS_AS(l.validate(3), ArgumentError);
  KernelLayout gap = l;
  gap.similarity_groups = {0, 0, 2};
  CHECK_THROWS_AS(gap.validate(4), ArgumentError);
  ModelParams p{vec({1, 2}), vec({0.5, -0.5}), l};
  CHECK(p.packed() == vec({1, 2, 0.5, -0.5}));
  const auto back = ModelParams::unpack(p.packed(), l);
  CHECK(back.beta == p.beta);
  CHECK(back.log_lengthscales == p.log_lengthscales);
  CHECK(p.feature_lengthscales()[1] == doctest::Approx(std::exp(0.5)));
  CHECK(p.feature_lengthscales()[2] == doctest::Approx(std::exp(-0.5)));
  CHECK_THROWS_AS(ModelParams::unpack(vec({1, 2, 3}), l), ArgumentError);
}

TEST_CASE("kernel properties on random inputs") {
  Rng root(5);
  for (int t = 0; t < 100; ++t) {
    Rng r = root.derive(static_cast<std::uint64_t>(t));
    const int n = static_cast<int>(r.uniform_int(1, 8));
    const int d = static_cast<int>(r.uniform_int(1, 4));
    const auto a = random_assortment(r, n, d);
    const auto p = params_for(d, r);
    const auto kb = build_kernel(p, a);
    for (int i = 0; i < n; ++i) {
      CHECK(kb.S(i, i) == 1.0);
      for (int j = 0; j < n; ++j) {
        CHECK(kb.L(i, j) == doctest::Approx(kb.q[i] * kb.S(i, j) * kb.q[j]).epsilon(1e-14));
        CHECK(kb.S(i, j) >= 0.0);
        CHECK(kb.S(i, j) <= 1.0);
      }
    }
    CHECK(psd_check(kb.S, 1e-8));

    // Scaling a similarity column and its lengthscale together leaves S unchanged.
    const double c = std::exp(r.normal());
    const int k = static_cast<int>(r.uniform_int(0, d - 1));
    Assortment scaled = a;
    scaled.features.col(k) *= c;
    ModelParams ps = p;
    ps.log_lengthscales[k] += std::log(c);
    ps.beta[k] /= c;
    const auto kb2 = build_kernel(ps, scaled);
    CHECK((kb2.S - kb.S).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("kernel masks: unused columns do not matter") {
  Rng r(8);
  auto a = random_assortment(r, 4, 3);
  KernelLayout l;
  l.quality_features = {0};
  l.similarity_features = {1};
  l.similarity_groups = {0};
  ModelParams p{vec({0.7}), vec({0.2}), l};
  const auto base = build_kernel(p, a);
  a.features.col(2).setConstant(100.0);
  const auto moved = build_kernel(p, a);
  CHECK(base.L == moved.L);
  a.features.col(1).setZero();
  CHECK(build_kernel(p, a).q == base.q);
}
