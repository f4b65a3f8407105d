#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "dcm/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "dcm_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" DCM_CLI_PATH "' " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(workdir() / p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: usage errors exit 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("fit") == 2);
  CHECK(run_cli("fit --data x.jsonl --method bogus") == 2);
  CHECK(run_cli("simulate --seed -4 --out s") == 2);
  CHECK(run_cli("simulate --out s", "DCM_SEED=notanumber") == 2);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("cli: simulate, fit, predict, evaluate and replay") {
  REQUIRE(run_cli("simulate --n 80 --eval-n 20 --radius 0.3 --seed 4 --out sim") == 0);
  CHECK(fs::exists(workdir() / "sim" / "data.jsonl"));
  CHECK(fs::exists(workdir() / "sim" / "eval.jsonl"));
  CHECK(fs::exists(workdir() / "sim" / "manifest.json"));

  // DCM_SEED supplies the seed and --seed overrides it.
  REQUIRE(run_cli("simulate --n 10 --out env_a", "DCM_SEED=9") == 0);
  REQUIRE(run_cli("simulate --n 10 --seed 9 --out env_b", "DCM_SEED=1") == 0);
  REQUIRE(run_cli("simulate --n 10 --seed 10 --out env_c") == 0);
  CHECK(slurp("env_a/data.jsonl") == slurp("env_b/data.jsonl"));
  CHECK(slurp("env_a/data.jsonl") != slurp("env_c/data.jsonl"));

  REQUIRE(run_cli("fit --data sim/data.jsonl --out fit") == 0);
  const auto art = dcm::io::read_json(workdir() / "fit" / "fit.json");
  CHECK(art["format"] == "dcm-fit");
  CHECK(fs::exists(workdir() / "fit" / "summary.csv"));

  CHECK(run_cli("predict --fit fit/fit.json --data sim/eval.jsonl --draws 3 --seed 2 --out pred") == 0);
  CHECK(run_cli("predict --fit fit/fit.json --data sim/eval.jsonl --draws 3 --seed 2 --out pred2") == 0);
  CHECK(slurp("pred/predictions.jsonl") == slurp("pred2/predictions.jsonl"));
  std::istringstream lines(slurp("pred/predictions.jsonl"));
  int count = 0;
  for (std::string line; std::getline(lines, line);) ++count;
  CHECK(count == 60);

  CHECK(run_cli("evaluate --fit fit/fit.json --data sim/data.jsonl --draws 1 --out ev") == 0);
  const auto scores = dcm::io::read_json(workdir() / "ev" / "scores.json");
  CHECK(scores["mcc_mean"].get<double>() >= -1.0);
  CHECK(scores["mcc_mean"].get<double>() <= 1.0);

  for (const char* run : {"sim", "fit", "pred", "ev"}) {
    INFO(run);
    CHECK(run_cli(std::string("replay --manifest ") + run + "/manifest.json --out replay_" + run) == 0);
  }

  // Tampered outputs are not what the replay produces.
  const auto manifest = dcm::io::read_json(workdir() / "fit" / "manifest.json");
  auto m = dcm::io::manifest_from_json(manifest);
  m.outputs[0].second = std::string(64, '0');
  dcm::io::write_json(workdir() / "tampered" / "manifest.json", dcm::io::manifest_to_json(m));
  CHECK(run_cli("replay --manifest tampered/manifest.json --out replay_tampered") == 3);
}

TEST_CASE("cli: data errors exit 1") {
  CHECK(run_cli("fit --data missing.jsonl --out f") == 1);
  std::ofstream(workdir() / "broken.jsonl") << "{\"format\":\"dcm-dataset\"\n";
  CHECK(run_cli("fit --data broken.jsonl --out f") == 1);
  REQUIRE(run_cli("simulate --n 30 --seed 1 --out s1") == 0);
  REQUIRE(run_cli("simulate --kind lora --n 10 --out lora") == 0);
  REQUIRE(run_cli("fit --data s1/data.jsonl --out f1") == 0);
  CHECK(run_cli("predict --fit f1/fit.json --data lora/data.jsonl --out p") == 1);
  CHECK(run_cli("fit --data s1/data.jsonl --method mnl --out m") == 1);
  CHECK(run_cli("fit --data s1/data.jsonl --method mnl --multi split --out m") == 0);
}

TEST_CASE("cli: verify exit codes") {
  CHECK(run_cli("verify --trials 1 --out v") == 0);
  CHECK(fs::exists(workdir() / "v" / "verify.json"));
  CHECK(run_cli("verify --trials 1 --inject-fault --out vf") == 3);
  CHECK(fs::exists(workdir() / "vf" / "failing_instance.json"));
}
