#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "dcm/errors.hpp"
#include "dcm/io.hpp"
#include "dcm/simulation.hpp"

using namespace dcm;
namespace fs = std::filesystem;

namespace {

void check_equal(const Dataset& a, const Dataset& b) {
  CHECK(a.schema == b.schema);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.observations[k].id == b.observations[k].id);
    CHECK(a.observations[k].items.ids == b.observations[k].items.ids);
    CHECK(a.observations[k].items.features == b.observations[k].items.features);
    CHECK(a.observations[k].chosen == b.observations[k].chosen);
  }
  CHECK(a.standardization.has_value() == b.standardization.has_value());
  if (a.standardization && b.standardization) {
    CHECK(a.standardization->mean == b.standardization->mean);
    CHECK(a.standardization->sd == b.standardization->sd);
  }
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return io::parse_dataset_jsonl(in);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dcm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("dataset JSONL round trip is exact") {
  SpatialConfig cfg;
  cfg.radius = 0.2;
  Dataset d = spatial_dataset(cfg, 30, Rng(1));
  d.observations[0].items.features(0, 1) = 0.1 + 0.2;
  d.observations[0].items.features(1, 1) = std::numeric_limits<double>::denorm_min();
  check_equal(d, parse(io::dataset_to_jsonl(d)));

  const Dataset s = standardized(d, compute_standardization(d));
  check_equal(s, parse(io::dataset_to_jsonl(s)));

  const Dataset l = lora_dataset(LoraCampaignConfig{}, 10, Rng(2));
  check_equal(l, parse(io::dataset_to_jsonl(l)));

  const fs::path dir = scratch_dir("roundtrip");
  io::write_dataset(dir / "d.jsonl", l);
  check_equal(l, io::read_dataset(dir / "d.jsonl"));
}

TEST_CASE("dataset parsing ignores key order") {
  const Dataset a = parse(
      R"({"format":"dcm-dataset","version":1,"feature_names":["a","b"],"quality_mask":[0,1],"similarity_mask":[1],"similarity_groups":[0],"group_names":[],"standardize":[],"standardization":null})"
      "\n"
      R"({"id":"o1","items":[{"id":"i1","x":[1,2],"chosen":true},{"id":"i2","x":[3,4],"chosen":false}]})"
      "\n");
  const Dataset b = parse(
      R"({"standardization":null,"standardize":[],"similarity_groups":[0],"group_names":[],"similarity_mask":[1],"quality_mask":[0,1],"feature_names":["a","b"],"version":1,"format":"dcm-dataset"})"
      "\n"
      R"({"items":[{"chosen":true,"x":[1,2],"id":"i1"},{"x":[3,4],"id":"i2","chosen":false}],"id":"o1"})"
      "\n");
  check_equal(a, b);
  CHECK(a.observations[0].chosen == SubsetIndex{0});
}

TEST_CASE("dataset parse errors carry line numbers") {
  const std::string header =
      R"({"format":"dcm-dataset","version":1,"feature_names":["a"],"quality_mask":[0],"similarity_mask":[0],"similarity_groups":[0],"group_names":[],"standardize":[],"standardization":null})"
      "\n";
  const std::string good = R"({"id":"o1","items":[{"id":"i1","x":[1],"chosen":true}]})"
                           "\n";
  auto message = [](const std::string& text) {
    try {
      parse(text);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(header + good + "{not json\n").find("line 3") != std::string::npos);
  CHECK(message(header + R"({"id":"o2","items":[{"id":"i1","x":[1,2],"chosen":true}]})"
                         "\n")
            .find("line 2") != std::string::npos);
  CHECK(message(R"({"format":"other"})"
                "\n")
            .find("line 1") != std::string::npos);
  CHECK_THROWS_AS(io::read_dataset("/nonexistent/dcm.jsonl"), DataError);
}

TEST_CASE("fit artifact and chains round trip") {
  io::FitArtifact a;
  a.method = "map";
  a.fit.model = "determinantal";
  a.fit.params = {Eigen::Vector2d(0.1, -0.7), Eigen::VectorXd::Constant(1, std::log(0.3)),
                  {{0, 1}, {0, 1}, {0, 0}}};
  a.fit.log_posterior = -123.456;
  a.fit.grad_norm = std::numeric_limits<double>::infinity();
  a.fit.covariance = Eigen::Matrix3d::Identity() * 0.25;
  a.fit.provenance = {{"optimizer", "bfgs"}};
  a.schema.names = {"x", "y"};
  a.schema.layout = a.fit.params.layout;
  a.standardization = Standardization::identity(2);
  const auto b = io::fit_from_json(io::fit_to_json(a));
  CHECK(b.method == "map");
  CHECK(b.fit.params.packed() == a.fit.params.packed());
  CHECK(b.fit.log_posterior == a.fit.log_posterior);
  CHECK(b.fit.grad_norm == std::numeric_limits<double>::infinity());
  CHECK(b.fit.covariance == a.fit.covariance);
  CHECK(b.schema == a.schema);
  CHECK(b.fit.provenance == a.fit.provenance);
  CHECK(io::fit_to_json(b).dump() == io::fit_to_json(a).dump());

  PosteriorChains c;
  c.n_chains = 2;
  c.n_steps = 3;
  c.dim = 1;
  c.warmup = 7;
  c.draws = {1, 2, 3, 4, 5, 6.5};
  c.acceptance_rates = {0.2, 0.3};
  c.param_names = {"x"};
  c.layout = {{0}, {}, {}};
  const auto d = io::chains_from_json(io::chains_to_json(c));
  CHECK(d.draws == c.draws);
  CHECK(d.at(1, 2, 0) == 6.5);
  CHECK(d.acceptance_rates == c.acceptance_rates);
  CHECK(d.layout == c.layout);
}

TEST_CASE("schema mismatch names the columns") {
  FeatureSchema a = spatial_schema();
  FeatureSchema b = a;
  b.names[2] = "z";
  CHECK_NOTHROW(io::check_same_schema(a, a));
  try {
    io::check_same_schema(a, b);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("z") != std::string::npos);
  }
}

TEST_CASE("digests and manifests") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const fs::path dir = scratch_dir("manifest");
  io::write_text(dir / "sub" / "a.txt", "abc");
  CHECK(io::sha256_file(dir / "sub" / "a.txt") == io::sha256_hex("abc"));

  io::RunManifest m;
  m.command = "simulate";
  m.argv = {"simulate", "--n", "3"};
  m.config = {{"n", 3}, {"kind", "spatial"}};
  m.seed = 18446744073709551615ull;
  m.inputs = {{"in.jsonl", "00"}};
  m.outputs = {{"data.jsonl", "11"}};
  m.started = io::utc_now();
  m.finished = m.started;
  io::write_json(dir / "manifest.json", io::manifest_to_json(m));
  const auto back = io::manifest_from_json(io::read_json(dir / "manifest.json"));
  CHECK(back.command == m.command);
  CHECK(back.argv == m.argv);
  CHECK(back.config == m.config);
  CHECK(back.seed == m.seed);
  CHECK(back.inputs == m.inputs);
  CHECK(back.outputs == m.outputs);
  CHECK(back.artifact_version == io::kArtifactVersion);
}
