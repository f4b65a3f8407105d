#include "dcm/subset.hpp"

#include <algorithm>

#include "dcm/errors.hpp"

namespace dcm {

SubsetIndex::SubsetIndex(std::vector<int> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    throw ArgumentError("subset contains duplicate indices");
  if (!indices_.empty() && indices_.front() < 0)
    throw ArgumentError("subset contains a negative index");
}

SubsetIndex SubsetIndex::from_mask(std::uint64_t mask, int n) {
  SubsetIndex out;
  for (int i = 0; i < n; ++i)
    if (mask >> i & 1U) out.indices_.push_back(i);
  return out;
}

std::uint64_t SubsetIndex::mask() const {
  std::uint64_t m = 0;
  for (int i : indices_) {
    if (i >= 64) throw CapacityError("subset mask limited to 64 items");
    m |= std::uint64_t{1} << i;
  }
  return m;
}

void SubsetIndex::validate(int n) const {
  if (!indices_.empty() && indices_.back() >= n)
    throw ArgumentError("subset index " + std::to_string(indices_.back()) +
                        " out of range for assortment of size " + std::to_string(n));
}

bool SubsetIndex::contains(int i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::string SubsetIndex::to_string() const {
  std::string s = "{";
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(indices_[k]);
  }
  return s + "}";
}

}  // namespace dcm
