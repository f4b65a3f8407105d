#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dcm/kernel.hpp"
#include "dcm/subset.hpp"

namespace dcm {

/// Column names plus the roles each column plays in the model.
struct FeatureSchema {
  std::vector<std::string> names;
  KernelLayout layout;
  std::vector<std::string> group_names;  // one label per similarity group; may be empty
  std::vector<int> standardize;          // columns standardized at fit time

  int dim() const { return static_cast<int>(names.size()); }
  void validate() const;
  /// Names of quality coefficients followed by log-lengthscale groups.
  std::vector<std::string> parameter_names() const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Per-feature affine map x -> (x - mean) / sd. Identity (0, 1) for columns
/// that are not standardized.
struct Standardization {
  Vector mean;
  Vector sd;

  static Standardization identity(int d);
  Matrix apply(const Matrix& features) const;
};

struct Observation {
  std::string id;
  Assortment items;
  SubsetIndex chosen;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Observation> observations;
  /// Present when the features have already been standardized.
  std::optional<Standardization> standardization;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
  /// Throws DataError naming the first inconsistent observation.
  void validate() const;
};

/// Mean and sd over every item of every observation, for the schema's
/// `standardize` columns. Zero-variance columns get sd = 1.
Standardization compute_standardization(const Dataset& data);

/// Copy of `data` with `s` applied and recorded.
Dataset standardized(const Dataset& data, const Standardization& s);

/// 0/1 labels of `chosen` over n items.
std::vector<int> labels_of(const SubsetIndex& chosen, int n);

}  // namespace dcm
