#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dcm/baselines.hpp"
#include "dcm/errors.hpp"
#include "dcm/evaluation.hpp"
#include "dcm/inference.hpp"
#include "dcm/io.hpp"
#include "dcm/likelihood.hpp"
#include "dcm/sampling.hpp"
#include "dcm/simulation.hpp"
#include "dcm/verify.hpp"

namespace py = pybind11;
using namespace dcm;

namespace {

SimilarityMode mode_of(const std::string& name) {
  if (name == "rbf") return similarity::Rbf{};
  if (name == "identity") return similarity::Identity{};
  if (name == "allones") return similarity::AllOnes{};
  throw ArgumentError("unknown similarity '" + name + "'");
}

KernelLayout layout_of(int d, std::optional<std::vector<int>> quality, std::optional<std::vector<int>> sim,
                       std::optional<std::vector<int>> groups) {
  KernelLayout l = KernelLayout::all_features(d);
  if (quality) l.quality_features = *quality;
  if (sim) {
    l.similarity_features = *sim;
    l.similarity_groups.resize(sim->size());
    for (std::size_t k = 0; k < sim->size(); ++k) l.similarity_groups[k] = static_cast<int>(k);
  }
  if (groups) l.similarity_groups = *groups;
  l.validate(d);
  return l;
}

std::vector<std::vector<int>> as_lists(const std::vector<SubsetIndex>& v) {
  std::vector<std::vector<int>> out;
  for (const auto& s : v) out.push_back(s.indices());
  return out;
}

py::dict fit_dict(const FitResult& f, const FeatureSchema& schema) {
  py::dict d;
  d["model"] = f.model;
  d["beta"] = f.params.beta;
  d["log_lengthscales"] = f.params.log_lengthscales;
  d["log_posterior"] = f.log_posterior;
  d["converged"] = f.converged;
  d["iterations"] = f.iterations;
  d["covariance"] = f.covariance;
  d["parameter_names"] = schema.parameter_names();
  return d;
}

}  // namespace

PYBIND11_MODULE(_dcm, m) {
  m.doc() = "Determinantal subset-choice models";

  py::register_exception<Error>(m, "DcmError", PyExc_RuntimeError);

  m.def(
      "build_kernel",
      [](const Vector& beta, const Vector& log_lengthscales, const Matrix& features,
         std::optional<std::vector<int>> quality, std::optional<std::vector<int>> similarity,
         std::optional<std::vector<int>> groups, const std::string& mode) {
        ModelParams p{beta, log_lengthscales,
                      layout_of(static_cast<int>(features.cols()), quality, similarity, groups)};
        Assortment a{features, {}};
        const KernelBundle kb = build_kernel(p, a, mode_of(mode));
        return py::make_tuple(kb.q, kb.S, kb.L);
      },
      py::arg("beta"), py::arg("log_lengthscales"), py::arg("features"), py::arg("quality") = py::none(),
      py::arg("similarity") = py::none(), py::arg("groups") = py::none(), py::arg("mode") = "rbf",
      "Returns (q, S, L) for one assortment.");

  m.def("log_normalizer", &log_normalizer, py::arg("L"), "log det(I + L).");
  m.def(
      "log_det_submatrix",
      [](const Matrix& M, std::vector<int> subset) { return log_det_submatrix(M, SubsetIndex(std::move(subset))); },
      py::arg("M"), py::arg("subset"));
  m.def(
      "subset_probability",
      [](const Matrix& L, std::vector<int> subset) {
        return std::exp(log_det_submatrix(L, SubsetIndex(std::move(subset))) - log_normalizer(L));
      },
      py::arg("L"), py::arg("subset"));
  m.def(
      "enumerate_pmf", [](const Matrix& L, int cap) { return enumerate_pmf(L, cap).prob; }, py::arg("L"),
      py::arg("cap") = kDefaultEnumerationCap, "Probabilities of all subsets, indexed by bitmask.");

  m.def(
      "sample",
      [](const Matrix& L, int n, std::uint64_t seed, const std::string& method) {
        Rng rng(seed);
        std::vector<SubsetIndex> out;
        if (method == "spectral") {
          const SpectralSampler s(L);
          for (int k = 0; k < n; ++k) out.push_back(s(rng));
        } else if (method == "gumbel") {
          const GumbelRumSampler s(L);
          for (int k = 0; k < n; ++k) out.push_back(s(rng));
        } else if (method == "enumeration") {
          const EnumerationSampler s(L);
          for (int k = 0; k < n; ++k) out.push_back(s(rng));
        } else {
          throw ArgumentError("unknown sampler '" + method + "'");
        }
        return as_lists(out);
      },
      py::arg("L"), py::arg("n"), py::arg("seed") = 0, py::arg("method") = "spectral");

  m.def("mcc", &mcc, py::arg("y"), py::arg("yhat"));
  m.def(
      "logistic_log_likelihood",
      [](const Vector& beta, const Matrix& X, std::vector<int> c) {
        return logistic_log_likelihood(beta, X, SubsetIndex(std::move(c)));
      },
      py::arg("beta"), py::arg("X"), py::arg("chosen"));
  m.def(
      "mnl_log_likelihood",
      [](const Vector& beta, const Matrix& X, std::vector<int> c) {
        return mnl_log_likelihood(beta, X, SubsetIndex(std::move(c)));
      },
      py::arg("beta"), py::arg("X"), py::arg("chosen"));

  m.def(
      "simulate_spatial",
      [](int n, double radius, std::uint64_t seed) {
        SpatialConfig cfg;
        cfg.radius = radius;
        return io::dataset_to_jsonl(spatial_dataset(cfg, n, Rng(seed)));
      },
      py::arg("n"), py::arg("radius") = 0.5, py::arg("seed") = 0, "Spatial dataset as JSONL text.");
  m.def(
      "simulate_lora",
      [](int n, std::uint64_t seed) { return io::dataset_to_jsonl(lora_dataset(LoraCampaignConfig{}, n, Rng(seed))); },
      py::arg("n"), py::arg("seed") = 0, "Synthetic LoRa dataset as JSONL text.");

  m.def(
      "fit",
      [](const std::string& jsonl, const std::string& method, const std::string& mode) {
        std::istringstream in(jsonl);
        Dataset raw = io::parse_dataset_jsonl(in);
        const Dataset data = raw.standardization ? raw : standardized(raw, compute_standardization(raw));
        const PriorSpec pr = PriorSpec::defaults(data.schema.layout);
        FitResult f;
        if (method == "map")
          f = map_fit(data, pr, {}, mode_of(mode));
        else if (method == "logistic")
          f = fit_baseline(BaselineKind::Logistic, data, pr);
        else if (method == "mnl")
          f = fit_baseline(BaselineKind::Mnl, data, pr, {}, MultiChoicePolicy::SplitSingletons);
        else
          throw ArgumentError("unknown method '" + method + "'");
        return fit_dict(f, data.schema);
      },
      py::arg("jsonl"), py::arg("method") = "map", py::arg("similarity") = "rbf",
      "MAP fit of a JSONL dataset (standardized with its own statistics).");

  m.def(
      "verify",
      [](std::uint64_t seed, int trials, int draws) {
        VerifyOptions o;
        o.seed = seed;
        o.trials = trials;
        o.draws = draws;
        return run_verification(o).to_json().dump();
      },
      py::arg("seed") = 0, py::arg("trials") = 0, py::arg("draws") = 100000,
      "Verification report as JSON text.");

  m.def(
      "sweep",
      [](std::vector<double> radii, int n_train, int n_eval, int n_draws, std::uint64_t seed) {
        SweepConfig cfg;
        cfg.radii = std::move(radii);
        cfg.n_train = n_train;
        cfg.n_eval = n_eval;
        cfg.n_draws = n_draws;
        return run_sweep_experiment(cfg, Rng(seed)).to_csv();
      },
      py::arg("radii"), py::arg("n_train") = 200, py::arg("n_eval") = 50, py::arg("n_draws") = 200,
      py::arg("seed") = 0, "Radius sweep as CSV text.");

  m.attr("__version__") = "1.0.0";
}
