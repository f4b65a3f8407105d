#include "dcm/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm::io {

namespace {

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Non-finite doubles are stored as the strings "inf", "-inf", "nan".
json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double to_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw DataError("expected a number, got " + j.dump());
}

Vector vec_from_json(const json& j) {
  if (!j.is_array()) throw DataError("expected an array, got " + j.dump());
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_num(j[i]);
  return v;
}

json mat_to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    a.push_back(std::move(row));
  }
  return a;
}

Matrix mat_from_json(const json& j) {
  if (!j.is_array()) throw DataError("expected a matrix");
  if (j.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw DataError("ragged matrix");
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = to_num(j[r][c]);
  }
  return m;
}

json layout_to_json(const KernelLayout& l) {
  return json{{"quality_mask", l.quality_features},
              {"similarity_mask", l.similarity_features},
              {"similarity_groups", l.similarity_groups}};
}

KernelLayout layout_from_json(const json& j) {
  KernelLayout l;
  l.quality_features = j.at("quality_mask").get<std::vector<int>>();
  l.similarity_features = j.at("similarity_mask").get<std::vector<int>>();
  l.similarity_groups = j.at("similarity_groups").get<std::vector<int>>();
  return l;
}

json standardization_to_json(const Standardization& s) {
  return json{{"mean", vec_to_json(s.mean)}, {"sd", vec_to_json(s.sd)}};
}

Standardization standardization_from_json(const json& j) {
  return Standardization{vec_from_json(j.at("mean")), vec_from_json(j.at("sd"))};
}

json params_to_json(const ModelParams& p) {
  return json{{"beta", vec_to_json(p.beta)},
              {"log_lengthscales", vec_to_json(p.log_lengthscales)},
              {"layout", layout_to_json(p.layout)}};
}

ModelParams params_from_json(const json& j) {
  ModelParams p;
  p.beta = vec_from_json(j.at("beta"));
  p.log_lengthscales = vec_from_json(j.at("log_lengthscales"));
  p.layout = layout_from_json(j.at("layout"));
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json schema_to_json(const FeatureSchema& schema) {
  json j;
  j["feature_names"] = schema.names;
  auto l = layout_to_json(schema.layout);
  for (auto& [k, v] : l.items()) j[k] = v;
  j["group_names"] = schema.group_names;
  std::vector<std::string> std_names;
  for (int c : schema.standardize) std_names.push_back(schema.names.at(static_cast<std::size_t>(c)));
  j["standardize"] = std_names;
  return j;
}

FeatureSchema schema_from_json(const json& j) {
  FeatureSchema s;
  s.names = j.at("feature_names").get<std::vector<std::string>>();
  s.layout = layout_from_json(j);
  if (j.contains("group_names")) s.group_names = j.at("group_names").get<std::vector<std::string>>();
  if (j.contains("standardize")) {
    for (const auto& name : j.at("standardize").get<std::vector<std::string>>()) {
      auto it = std::find(s.names.begin(), s.names.end(), name);
      if (it == s.names.end()) throw DataError("standardize names unknown feature '" + name + "'");
      s.standardize.push_back(static_cast<int>(it - s.names.begin()));
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw DataError(std::string("invalid schema: ") + e.what());
  }
  return s;
}

std::string dataset_to_jsonl(const Dataset& data) {
  std::ostringstream out;
  json header;
  header["format"] = "dcm-dataset";
  header["version"] = 1;
  const json schema = schema_to_json(data.schema);
  for (auto& [k, v] : schema.items()) header[k] = v;
  header["standardization"] =
      data.standardization ? standardization_to_json(*data.standardization) : json(nullptr);
  out << header.dump() << '\n';
  for (const auto& obs : data.observations) {
    json line;
    line["id"] = obs.id;
    json items = json::array();
    for (int i = 0; i < obs.items.size(); ++i) {
      json it;
      it["id"] = obs.items.ids.empty() ? std::to_string(i) : obs.items.ids[static_cast<std::size_t>(i)];
      it["x"] = vec_to_json(obs.items.features.row(i).transpose());
      it["chosen"] = obs.chosen.contains(i);
      items.push_back(std::move(it));
    }
    line["items"] = std::move(items);
    out << line.dump() << '\n';
  }
  return out.str();
}

Dataset parse_dataset_jsonl(std::istream& in) {
  Dataset data;
  std::string text;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(where() + "invalid JSON (" + e.what() + ")");
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "dcm-dataset")
          throw DataError("header must have \"format\": \"dcm-dataset\"");
        if (j.value("version", 0) != 1) throw DataError("unsupported dataset version");
        data.schema = schema_from_json(j);
        if (j.contains("standardization") && !j.at("standardization").is_null())
          data.standardization = standardization_from_json(j.at("standardization"));
        have_header = true;
        continue;
      }
      Observation obs;
      obs.id = j.at("id").get<std::string>();
      const auto& items = j.at("items");
      if (!items.is_array() || items.empty()) throw DataError("observation has no items");
      const int d = data.schema.dim();
      obs.items.features.resize(static_cast<Eigen::Index>(items.size()), d);
      std::vector<int> chosen;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        obs.items.ids.push_back(it.at("id").get<std::string>());
        Vector x = vec_from_json(it.at("x"));
        if (x.size() != d)
          throw DataError("item '" + obs.items.ids.back() + "' has " + std::to_string(x.size()) +
                          " features, schema has " + std::to_string(d));
        obs.items.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
        if (it.at("chosen").get<bool>()) chosen.push_back(static_cast<int>(i));
      }
      obs.chosen = SubsetIndex(chosen);
      obs.items.validate();
      data.observations.push_back(std::move(obs));
    } catch (const DataError& e) {
      throw DataError(where() + e.what());
    } catch (const json::exception& e) {
      throw DataError(where() + e.what());
    } catch (const Error& e) {
      throw DataError(where() + e.what());
    }
  }
  if (!have_header) throw DataError("line 1: missing dataset header");
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_dataset_jsonl(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_text(path, dataset_to_jsonl(data));
}

json fit_to_json(const FitArtifact& a) {
  json j;
  j["format"] = "dcm-fit";
  j["version"] = 1;
  j["method"] = a.method;
  j["model"] = a.fit.model;
  j["schema"] = schema_to_json(a.schema);
  j["standardization"] = standardization_to_json(a.standardization);
  j["params"] = params_to_json(a.fit.params);
  j["log_posterior"] = num(a.fit.log_posterior);
  j["grad_norm"] = num(a.fit.grad_norm);
  j["iterations"] = a.fit.iterations;
  j["converged"] = a.fit.converged;
  j["covariance"] = mat_to_json(a.fit.covariance);
  if (a.posterior_mean.size() > 0) {
    j["posterior_mean"] = vec_to_json(a.posterior_mean);
    j["posterior_sd"] = vec_to_json(a.posterior_sd);
  }
  if (a.diagnostics) {
    json d;
    json ess = json::array(), rhat = json::array();
    for (Eigen::Index i = 0; i < a.diagnostics->ess.size(); ++i) ess.push_back(num(a.diagnostics->ess[i]));
    for (Eigen::Index i = 0; i < a.diagnostics->rhat.size(); ++i) rhat.push_back(num(a.diagnostics->rhat[i]));
    d["ess"] = ess;
    d["rhat"] = rhat;
    j["diagnostics"] = d;
  } else {
    j["diagnostics"] = nullptr;
  }
  json prov = json::object();
  for (const auto& [k, v] : a.fit.provenance) prov[k] = v;
  j["provenance"] = prov;
  return j;
}

FitArtifact fit_from_json(const json& j) {
  try {
    if (j.value("format", "") != "dcm-fit") throw DataError("not a fit artifact");
    FitArtifact a;
    a.method = j.at("method").get<std::string>();
    a.fit.model = j.at("model").get<std::string>();
    a.schema = schema_from_json(j.at("schema"));
    a.standardization = standardization_from_json(j.at("standardization"));
    a.fit.params = params_from_json(j.at("params"));
    a.fit.log_posterior = to_num(j.at("log_posterior"));
    a.fit.grad_norm = to_num(j.at("grad_norm"));
    a.fit.iterations = j.at("iterations").get<int>();
    a.fit.converged = j.at("converged").get<bool>();
    a.fit.covariance = mat_from_json(j.at("covariance"));
    if (j.contains("posterior_mean")) {
      a.posterior_mean = vec_from_json(j.at("posterior_mean"));
      a.posterior_sd = vec_from_json(j.at("posterior_sd"));
    }
    if (j.contains("diagnostics") && !j.at("diagnostics").is_null())
      a.diagnostics = Diagnostics{vec_from_json(j["diagnostics"].at("ess")),
                                  vec_from_json(j["diagnostics"].at("rhat"))};
    for (auto& [k, v] : j.at("provenance").items()) a.fit.provenance.emplace_back(k, v.get<std::string>());
    a.fit.params.validate();
    return a;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fit artifact: ") + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(std::string("malformed fit artifact: ") + e.what());
  }
}

json chains_to_json(const PosteriorChains& c) {
  json j;
  j["format"] = "dcm-chains";
  j["version"] = 1;
  j["shape"] = {c.n_chains, c.n_steps, c.dim};
  j["param_names"] = c.param_names;
  j["warmup"] = c.warmup;
  j["layout"] = layout_to_json(c.layout);
  j["acceptance_rates"] = c.acceptance_rates;
  json draws = json::array();
  for (int ch = 0; ch < c.n_chains; ++ch) {
    json chain = json::array();
    for (int s = 0; s < c.n_steps; ++s) {
      json row = json::array();
      for (int p = 0; p < c.dim; ++p) row.push_back(c.at(ch, s, p));
      chain.push_back(std::move(row));
    }
    draws.push_back(std::move(chain));
  }
  j["draws"] = std::move(draws);
  return j;
}

PosteriorChains chains_from_json(const json& j) {
  try {
    if (j.value("format", "") != "dcm-chains") throw DataError("not a chains file");
    PosteriorChains c;
    auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) throw DataError("chains shape must have 3 entries");
    c.n_chains = shape[0];
    c.n_steps = shape[1];
    c.dim = shape[2];
    c.param_names = j.at("param_names").get<std::vector<std::string>>();
    c.warmup = j.at("warmup").get<int>();
    c.layout = layout_from_json(j.at("layout"));
    c.acceptance_rates = j.at("acceptance_rates").get<std::vector<double>>();
    const auto& draws = j.at("draws");
    c.draws.reserve(static_cast<std::size_t>(c.n_chains) * c.n_steps * c.dim);
    if (draws.size() != static_cast<std::size_t>(c.n_chains)) throw DataError("chains draws do not match shape");
    for (const auto& chain : draws) {
      if (chain.size() != static_cast<std::size_t>(c.n_steps)) throw DataError("chains draws do not match shape");
      for (const auto& row : chain) {
        if (row.size() != static_cast<std::size_t>(c.dim)) throw DataError("chains draws do not match shape");
        for (const auto& v : row) c.draws.push_back(v.get<double>());
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed chains file: ") + e.what());
  }
}

json read_json(const std::filesystem::path& path) {
  auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

void check_same_schema(const FeatureSchema& fitted, const FeatureSchema& data) {
  if (fitted == data) return;
  std::string msg = "feature schema mismatch: ";
  if (fitted.names != data.names) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
      return s + "]";
    };
    msg += "fit has columns " + join(fitted.names) + ", data has " + join(data.names);
  } else {
    msg += "column roles differ";
  }
  throw SchemaError(msg);
}

json manifest_to_json(const RunManifest& m) {
  json j;
  j["format"] = "dcm-run-manifest";
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["artifact_version"] = m.artifact_version;
  json in = json::array();
  for (const auto& [p, h] : m.inputs) in.push_back({{"path", p}, {"sha256", h}});
  j["inputs"] = in;
  json out = json::array();
  for (const auto& [p, h] : m.outputs) out.push_back({{"file", p}, {"sha256", h}});
  j["outputs"] = out;
  j["started"] = m.started;
  j["finished"] = m.finished;
  return j;
}

RunManifest manifest_from_json(const json& j) {
  try {
    if (j.value("format", "") != "dcm-run-manifest") throw DataError("not a run manifest");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.artifact_version = j.at("artifact_version").get<std::string>();
    for (const auto& e : j.at("inputs")) m.inputs.emplace_back(e.at("path"), e.at("sha256"));
    for (const auto& e : j.at("outputs")) m.outputs.emplace_back(e.at("file"), e.at("sha256"));
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dcm::io
