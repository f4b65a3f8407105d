#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dcm {

/// Deterministic random stream over std::mt19937_64, with hand-rolled
/// distributions. `derive(k)` seeds a child from a SplitMix64 hash of
/// (parent seed, k); the child ignores the parent's position.
class Rng {
 public:
  static constexpr std::string_view algorithm = "mt19937_64/splitmix64-split";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  Rng derive(std::uint64_t key) const;
  Rng derive(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Integer uniform on [lo, hi] inclusive, without modulo bias.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }
  double normal();
  /// Standard Gumbel via -log(-log U), U in (0, 1).
  double gumbel();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dcm
