#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace dcm {

/// A subset C of an assortment, as sorted unique item positions.
class SubsetIndex {
 public:
  SubsetIndex() = default;
  /// Sorts and checks for duplicates and negatives.
  explicit SubsetIndex(std::vector<int> indices);
  SubsetIndex(std::initializer_list<int> indices)
      : SubsetIndex(std::vector<int>(indices)) {}

  /// Subset from a bitmask over n items (bit i set <=> item i chosen).
  static SubsetIndex from_mask(std::uint64_t mask, int n);
  std::uint64_t mask() const;

  /// Throws ArgumentError if any index is >= n.
  void validate(int n) const;

  const std::vector<int>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(int i) const;
  int operator[](std::size_t k) const { return indices_[k]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  std::string to_string() const;

  friend bool operator==(const SubsetIndex&, const SubsetIndex&) = default;
  friend auto operator<=>(const SubsetIndex&, const SubsetIndex&) = default;

 private:
  std::vector<int> indices_;
};

}  // namespace dcm
