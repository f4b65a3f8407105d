#include "dcm/dataset.hpp"

#include <cmath>
#include <set>

#include "dcm/errors.hpp"

namespace dcm {

void FeatureSchema::validate() const {
  std::set<std::string> seen(names.begin(), names.end());
  if (seen.size() != names.size()) throw DataError("feature names are not unique");
  try {
    layout.validate(dim());
  } catch (const ArgumentError& e) {
    throw DataError(std::string("feature schema: ") + e.what());
  }
  if (!group_names.empty() && static_cast<int>(group_names.size()) != layout.n_groups())
    throw DataError("feature schema: group_names must have one entry per similarity group");
  for (int c : standardize)
    if (c < 0 || c >= dim()) throw DataError("feature schema: standardize column out of range");
}

std::vector<std::string> FeatureSchema::parameter_names() const {
  std::vector<std::string> out;
  for (int c : layout.quality_features) out.push_back("beta[" + names[c] + "]");
  for (int g = 0; g < layout.n_groups(); ++g) {
    std::string label;
    if (!group_names.empty()) {
      label = group_names[g];
    } else {
      for (std::size_t k = 0; k < layout.similarity_features.size(); ++k)
        if (layout.similarity_groups[k] == g)
          label += (label.empty() ? "" : "+") + names[layout.similarity_features[k]];
    }
    out.push_back("log_lengthscale[" + label + "]");
  }
  return out;
}

Standardization Standardization::identity(int d) {
  return {Vector::Zero(d), Vector::Ones(d)};
}

Matrix Standardization::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw ArgumentError("standardization: dimension mismatch");
  return (features.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

void Dataset::validate() const {
  schema.validate();
  std::set<std::string> ids;
  for (const auto& obs : observations) {
    const std::string where = "observation '" + obs.id + "': ";
    if (!ids.insert(obs.id).second) throw DataError(where + "duplicate observation id");
    if (obs.items.dim() != schema.dim())
      throw DataError(where + "items have " + std::to_string(obs.items.dim()) +
                      " features, schema has " + std::to_string(schema.dim()));
    try {
      obs.items.validate();
      obs.chosen.validate(obs.items.size());
    } catch (const ArgumentError& e) {
      throw DataError(where + e.what());
    }
  }
}

Standardization compute_standardization(const Dataset& data) {
  const int d = data.schema.dim();
  Standardization s = Standardization::identity(d);
  for (int c : data.schema.standardize) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    for (const auto& obs : data.observations) {
      sum += obs.items.features.col(c).sum();
      count += static_cast<std::size_t>(obs.items.size());
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    for (const auto& obs : data.observations)
      sumsq += (obs.items.features.col(c).array() - mean).square().sum();
    const double sd = count > 1 ? std::sqrt(sumsq / static_cast<double>(count - 1)) : 0.0;
    s.mean[c] = mean;
    s.sd[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Dataset standardized(const Dataset& data, const Standardization& s) {
  if (data.standardization) throw DataError("dataset is already standardized");
  Dataset out = data;
  for (auto& obs : out.observations) obs.items.features = s.apply(obs.items.features);
  out.standardization = s;
  return out;
}

std::vector<int> labels_of(const SubsetIndex& chosen, int n) {
  chosen.validate(n);
  std::vector<int> y(n, 0);
  for (int i : chosen) y[i] = 1;
  return y;
}

}  // namespace dcm
