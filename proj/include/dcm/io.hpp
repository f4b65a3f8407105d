#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dcm/dataset.hpp"
#include "dcm/diagnostics.hpp"
#include "dcm/fit_result.hpp"
#include "dcm/inference.hpp"

namespace dcm::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "dcm 1.0.0";

// Dataset JSONL: line 1 is a header object, then one observation per line:
//   {"format":"dcm-dataset","version":1,"feature_names":[...],
//    "quality_mask":[...],"similarity_mask":[...],"similarity_groups":[...],
//    "group_names":[...],"standardize":[...],"standardization":null|{"mean":[..],"sd":[..]}}
//   {"id":"obs-0","items":[{"id":"p0","x":[...],"chosen":true}, ...]}

std::string dataset_to_jsonl(const Dataset& data);
/// Throws DataError with the 1-based line number of the first bad line.
Dataset parse_dataset_jsonl(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const json& j);

/// Fitted model: estimate, schema, standardization used, optional diagnostics.
struct FitArtifact {
  std::string method;  // "map" or "mcmc"
  FitResult fit;
  FeatureSchema schema;
  Standardization standardization;
  std::optional<Diagnostics> diagnostics;
  Vector posterior_mean;  // mcmc only
  Vector posterior_sd;    // mcmc only
};

json fit_to_json(const FitArtifact& a);
FitArtifact fit_from_json(const json& j);

json chains_to_json(const PosteriorChains& c);
PosteriorChains chains_from_json(const json& j);

json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Throws SchemaError naming the columns that differ.
void check_same_schema(const FeatureSchema& fitted, const FeatureSchema& data);

/// Record of one command invocation, enough to re-run it.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // arguments after the program name
  json config;
  std::uint64_t seed = 0;
  std::string artifact_version = kArtifactVersion;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // file name in run dir, sha256
  std::string started;
  std::string finished;
};

json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

/// Current UTC time as ISO-8601.
std::string utc_now();

}  // namespace dcm::io
