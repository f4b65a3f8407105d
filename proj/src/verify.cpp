#include "dcm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include "dcm/baselines.hpp"
#include "dcm/dataset.hpp"
#include "dcm/errors.hpp"
#include "dcm/kernel.hpp"
#include "dcm/likelihood.hpp"
#include "dcm/sampling.hpp"

namespace dcm {

using json = nlohmann::ordered_json;

namespace {

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? json("nan") : json(x > 0 ? "inf" : "-inf");
}

Matrix random_psd(Rng& rng, int n) {
  const int r = static_cast<int>(rng.uniform_int(1, n));
  const double scale = std::exp(rng.uniform() * 1.5 - 1.0);
  Matrix B(n, r);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < r; ++k) B(i, k) = scale * rng.normal();
  Matrix L = B * B.transpose();
  return 0.5 * (L + L.transpose());
}

Matrix random_features(Rng& rng, int n, int d) {
  Matrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) X(i, k) = rng.normal();
  return X;
}

Assortment random_assortment(Rng& rng, int n, int d) {
  Assortment a;
  a.features = random_features(rng, n, d);
  for (int i = 0; i < n; ++i) a.ids.push_back("i" + std::to_string(i));
  return a;
}

ModelParams random_params(Rng& rng, const KernelLayout& layout) {
  ModelParams p;
  p.layout = layout;
  p.beta = Vector(layout.n_quality());
  for (Eigen::Index k = 0; k < p.beta.size(); ++k) p.beta[k] = rng.normal();
  p.log_lengthscales = Vector(layout.n_groups());
  for (Eigen::Index k = 0; k < p.log_lengthscales.size(); ++k)
    p.log_lengthscales[k] = 0.5 * rng.normal();
  return p;
}

SubsetIndex random_subset(Rng& rng, int n) {
  return SubsetIndex::from_mask(static_cast<std::uint64_t>(rng.uniform_int(0, (std::int64_t{1} << n) - 1)), n);
}

std::vector<double> histogram(const std::function<SubsetIndex(Rng&)>& draw, Rng& rng, int n,
                              int draws, bool complement) {
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  std::vector<double> h(std::size_t{1} << n, 0.0);
  for (int k = 0; k < draws; ++k) {
    std::uint64_t m = draw(rng).mask();
    if (complement) m = full & ~m;
    h[m] += 1.0;
  }
  for (double& x : h) x /= draws;
  return h;
}

// Runs `trial(t, rng, metrics, instance)` and keeps the first failing instance.
CheckResult run_check(std::string name, const Rng& rng, int trials,
                      std::vector<CheckMetric> metrics,
                      const std::function<void(int, Rng&, std::vector<double>&, json&)>& trial) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult res;
  res.name = std::move(name);
  res.trials = trials;
  res.metrics = std::move(metrics);
  res.failing_instance = nullptr;
  for (int t = 0; t < trials; ++t) {
    Rng r = rng.derive(static_cast<std::uint64_t>(t));
    std::vector<double> dev(res.metrics.size(), 0.0);
    json inst = json::object();
    trial(t, r, dev, inst);
    bool failed = false;
    for (std::size_t k = 0; k < dev.size(); ++k) {
      const double d = std::isnan(dev[k]) ? std::numeric_limits<double>::infinity() : dev[k];
      res.metrics[k].max_deviation = std::max(res.metrics[k].max_deviation, d);
      if (d > res.metrics[k].tolerance) failed = true;
    }
    if (failed && res.failing_instance.is_null()) {
      json f;
      f["check"] = res.name;
      f["trial"] = t;
      f["seed"] = rng.derive(static_cast<std::uint64_t>(t)).seed();
      json devs = json::object();
      for (std::size_t k = 0; k < dev.size(); ++k) devs[res.metrics[k].name] = finite_or_string(dev[k]);
      f["deviations"] = devs;
      f["instance"] = inst;
      res.failing_instance = f;
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// Decomposition instances need lambda_min / lambda_max of S_C at least this.
constexpr double kMinReciprocalCondition = 1e-6;

double reciprocal_condition(const Matrix& S, const SubsetIndex& C) {
  if (C.empty()) return 1.0;
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(S(C.indices(), C.indices())).eigenvalues();
  return ev.maxCoeff() > 0 ? ev.minCoeff() / ev.maxCoeff() : 0.0;
}

int or_default(int trials, int fallback) { return trials > 0 ? trials : fallback; }

}  // namespace

bool CheckResult::passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const CheckMetric& m) { return m.passed(); });
}

CheckResult check_normalizer(const Rng& rng, CheckSize size, bool inject_fault) {
  return run_check(
      "normalizer_identity", rng, or_default(size.trials, 200),
      {{"relative_error", 0.0, 1e-8}}, [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int n = static_cast<int>(r.uniform_int(1, 10));
        const Matrix L = random_psd(r, n);
        const double sum = enumerate_pmf(L).normalizer;
        double det = std::exp(log_normalizer(L));
        if (inject_fault) det = -det;
        dev[0] = std::abs(sum - det) / std::abs(det);
        inst["L"] = matrix_json(L);
        inst["subset_sum"] = sum;
        inst["det_I_plus_L"] = det;
      });
}

CheckResult check_rum_equivalence(const Rng& rng, CheckSize size, bool inject_fault) {
  const int draws = size.draws;
  return run_check(
      "rum_equivalence", rng, or_default(size.trials, 20), {{"total_variation", 0.0, 0.02}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int n = static_cast<int>(r.uniform_int(1, 5));
        const Matrix L = random_psd(r, n);
        const Pmf pmf = enumerate_pmf(L);
        const GumbelRumSampler rum(L);
        Rng draw_rng = r.derive(1);
        auto h = histogram([&](Rng& g) { return rum(g); }, draw_rng, n, draws, inject_fault);
        dev[0] = total_variation(h, pmf.prob);
        inst["L"] = matrix_json(L);
        inst["draws"] = draws;
      });
}

CheckResult check_additive_decomposition(const Rng& rng, CheckSize size, bool inject_fault) {
  return run_check(
      "additive_decomposition", rng, or_default(size.trials, 1000),
      {{"decomposition_error", 0.0, 1e-9}, {"positive_correction", 0.0, 1e-12}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        Assortment a;
        ModelParams p;
        KernelBundle kb;
        SubsetIndex C;
        for (int attempt = 0; attempt < 1000; ++attempt) {
          const int n = static_cast<int>(r.uniform_int(1, 8));
          const int d = static_cast<int>(r.uniform_int(1, 3));
          a = random_assortment(r, n, d);
          p = random_params(r, KernelLayout::all_features(d));
          kb = build_kernel(p, a);
          C = random_subset(r, n);
          if (inject_fault && C.empty()) continue;
          if (reciprocal_condition(kb.S, C) >= kMinReciprocalCondition) break;
        }
        UtilityDecomposition u = implied_utility(kb, C);
        if (inject_fault) u.additive_part = -u.additive_part;
        if (std::isinf(u.total) && std::isinf(u.correction) && u.total < 0 && u.correction < 0) {
          dev[0] = 0.0;
        } else {
          dev[0] = std::abs(u.total - (u.additive_part + u.correction));
        }
        dev[1] = std::max(0.0, u.correction);
        inst["features"] = matrix_json(a.features);
        inst["beta"] = vector_json(p.beta);
        inst["log_lengthscales"] = vector_json(p.log_lengthscales);
        inst["subset"] = C.indices();
        inst["total"] = finite_or_string(u.total);
        inst["additive"] = finite_or_string(u.additive_part);
        inst["correction"] = finite_or_string(u.correction);
      });
}

CheckResult check_logistic_limit(const Rng& rng, CheckSize size, bool inject_fault) {
  return run_check(
      "logistic_limit", rng, or_default(size.trials, 100),
      {{"identity_log_likelihood_error", 0.0, 1e-9}, {"rbf_limit_total_variation", 0.0, 1e-6}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int n = static_cast<int>(r.uniform_int(1, 8));
        const int d = static_cast<int>(r.uniform_int(1, 3));
        const Assortment a = random_assortment(r, n, d);
        ModelParams p = random_params(r, KernelLayout::all_features(d));
        const Matrix Xq = quality_features(a, p.layout);
        const SubsetIndex C = random_subset(r, n);

        const KernelBundle kb = build_kernel(p, a, similarity::Identity{});
        double det_ll = subset_log_likelihood(kb, C);
        if (inject_fault) det_ll = -det_ll;
        const double logit_ll = logistic_log_likelihood(p.beta, Xq, C);
        dev[0] = std::abs(det_ll - logit_ll);

        double min_dist = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            min_dist = std::min(min_dist, (a.features.row(i) - a.features.row(j)).norm());
        if (!std::isfinite(min_dist)) min_dist = 1.0;
        p.log_lengthscales.setConstant(std::log(1e-3 * min_dist));
        const Pmf pmf = enumerate_pmf(build_kernel(p, a).L);
        std::vector<double> indep(pmf.prob.size());
        for (std::uint64_t m = 0; m < indep.size(); ++m) {
          double lp = 0.0;
          for (int i = 0; i < n; ++i) {
            const double z = Xq.row(i).dot(p.beta);
            lp += (m >> i & 1) ? -softplus(-z) : -softplus(z);
          }
          indep[m] = std::exp(lp);
        }
        dev[1] = total_variation(pmf.prob, indep);
        inst["features"] = matrix_json(a.features);
        inst["beta"] = vector_json(p.beta);
        inst["subset"] = C.indices();
        inst["determinantal"] = finite_or_string(det_ll);
        inst["logistic"] = finite_or_string(logit_ll);
      });
}

CheckResult check_mnl_limit(const Rng& rng, CheckSize size, bool inject_fault) {
  return run_check(
      "mnl_limit", rng, or_default(size.trials, 100),
      {{"multi_item_probability", 0.0, 1e-10}, {"small_subset_log_likelihood_error", 0.0, 1e-9}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int n = static_cast<int>(r.uniform_int(1, 8));
        const int d = static_cast<int>(r.uniform_int(1, 3));
        const Assortment a = random_assortment(r, n, d);
        const ModelParams p = random_params(r, KernelLayout::all_features(d));
        const Matrix Xq = quality_features(a, p.layout);
        const KernelBundle kb = build_kernel(p, a, similarity::AllOnes{});
        const double log_norm = log_normalizer(kb.L);
        double worst_multi = 0.0;
        double worst_small = 0.0;
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) {
          const SubsetIndex C = SubsetIndex::from_mask(m, n);
          const double ll = log_det_submatrix(kb.L, C) - log_norm;
          if (C.size() >= 2) {
            worst_multi = std::max(worst_multi, std::exp(ll));
          } else {
            double det_ll = ll;
            if (inject_fault) det_ll = -det_ll;
            worst_small = std::max(worst_small, std::abs(det_ll - mnl_log_likelihood(p.beta, Xq, C)));
          }
        }
        dev[0] = worst_multi;
        dev[1] = worst_small;
        inst["features"] = matrix_json(a.features);
        inst["beta"] = vector_json(p.beta);
      });
}

CheckResult check_gradient(const Rng& rng, CheckSize size, bool inject_fault) {
  return run_check(
      "beta_gradient", rng, or_default(size.trials, 50), {{"relative_error", 0.0, 1e-5}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int d = static_cast<int>(r.uniform_int(1, 3));
        Dataset data;
        data.schema.layout = KernelLayout::all_features(d);
        for (int k = 0; k < d; ++k) data.schema.names.push_back("x" + std::to_string(k));
        const ModelParams p = random_params(r, data.schema.layout);
        const int n_obs = static_cast<int>(r.uniform_int(1, 5));
        for (int o = 0; o < n_obs; ++o) {
          Observation obs;
          obs.id = "obs" + std::to_string(o);
          obs.items = random_assortment(r, static_cast<int>(r.uniform_int(2, 7)), d);
          const KernelBundle kb = build_kernel(p, obs.items);
          // Resample until the choice has positive probability.
          for (int attempt = 0; attempt < 50; ++attempt) {
            obs.chosen = spectral_sample(kb.L, r);
            if (std::isfinite(subset_log_likelihood(kb, obs.chosen))) break;
            obs.chosen = SubsetIndex{};
          }
          data.observations.push_back(std::move(obs));
        }
        const PriorSpec priors = PriorSpec::defaults(data.schema.layout);
        Vector g = grad_log_posterior(p, data, priors);
        if (inject_fault) g = -g;
        const Vector theta = p.packed();
        const int nq = p.layout.n_quality();
        Vector fd(nq);
        for (int k = 0; k < nq; ++k) {
          const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
          Vector tp = theta, tm = theta;
          tp[k] += h;
          tm[k] -= h;
          fd[k] = (dataset_log_posterior(ModelParams::unpack(tp, p.layout), data, priors) -
                   dataset_log_posterior(ModelParams::unpack(tm, p.layout), data, priors)) /
                  (2.0 * h);
        }
        dev[0] = (g.head(nq) - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
        inst["beta"] = vector_json(p.beta);
        inst["log_lengthscales"] = vector_json(p.log_lengthscales);
        inst["analytic"] = vector_json(g.head(nq));
        inst["finite_difference"] = vector_json(fd);
      });
}

CheckResult check_spectral_sampler(const Rng& rng, CheckSize size, bool inject_fault) {
  const int draws = size.draws;
  return run_check(
      "spectral_sampler", rng, or_default(size.trials, 10), {{"total_variation", 0.0, 0.02}},
      [&](int, Rng& r, std::vector<double>& dev, json& inst) {
        const int n = 4;
        const Matrix L = random_psd(r, n);
        const Pmf pmf = enumerate_pmf(L);
        const SpectralSampler sampler(L);
        Rng draw_rng = r.derive(1);
        auto h = histogram([&](Rng& g) { return sampler(g); }, draw_rng, n, draws, inject_fault);
        dev[0] = total_variation(h, pmf.prob);
        inst["L"] = matrix_json(L);
        inst["draws"] = draws;
      });
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

json VerifyReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["passed"] = passed();
  json arr = json::array();
  for (const auto& c : checks) {
    json e;
    e["name"] = c.name;
    e["passed"] = c.passed();
    e["trials"] = c.trials;
    json ms = json::array();
    for (const auto& m : c.metrics)
      ms.push_back({{"name", m.name},
                    {"max_deviation", finite_or_string(m.max_deviation)},
                    {"tolerance", m.tolerance},
                    {"passed", m.passed()}});
    e["metrics"] = ms;
    e["failing_instance"] = c.failing_instance;
    arr.push_back(std::move(e));
  }
  j["checks"] = arr;
  return j;
}

VerifyReport run_verification(const VerifyOptions& options) {
  const Rng rng(options.seed);
  const CheckSize size{options.trials, options.draws};
  VerifyReport report;
  report.seed = options.seed;
  report.checks.push_back(check_normalizer(rng.derive(0), size));
  report.checks.push_back(check_rum_equivalence(rng.derive(1), size));
  report.checks.push_back(check_additive_decomposition(rng.derive(2), size, options.inject_fault));
  report.checks.push_back(check_logistic_limit(rng.derive(3), size));
  report.checks.push_back(check_mnl_limit(rng.derive(4), size));
  report.checks.push_back(check_gradient(rng.derive(5), size));
  return report;
}

}  // namespace dcm
