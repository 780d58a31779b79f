#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace satp {

// xoshiro256** seeded through splitmix64. All distributions are implemented
// here rather than via <random> so the draw sequence for a seed is the same
// on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per call, the pair's second
  // value is cached).
  double normal();
  double normal(double mean, double stddev);
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  // Independent child stream keyed by a label; does not advance this one.
  Rng fork(std::string_view label) const;
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);
// 64-bit FNV-1a, used for stable string digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace satp
