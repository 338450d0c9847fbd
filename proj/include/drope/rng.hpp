#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace drope {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the index-th child stream of `seed`. Children of the same parent
/// are independent of the order in which they are requested.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/**
 * Counter-based 64-bit generator (SplitMix64). The whole state is a counter,
 * so streams are cheap to create and `child(i)` gives a reproducible
 * substream per trajectory, run or grid cell.
 *
 * Satisfies UniformRandomBitGenerator, but the helpers below are used for
 * all draws so that results do not depend on the standard library's
 * distribution implementations.
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : seed_(seed), counter_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    counter_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = counter_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  Rng child(std::uint64_t index) const noexcept { return Rng(derive_seed(seed_, index)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Exponential(1), used for Dirichlet draws.
  double exponential() noexcept { return -std::log1p(-uniform()); }

  /// Index drawn from an (unnormalized) cumulative weight table.
  int categorical(std::span<const double> cumulative) noexcept {
    const double u = uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    // skip zero-width bins that upper_bound can land on only via rounding
    while (it != cumulative.begin() && *it == *(it - 1)) --it;
    return static_cast<int>(it - cumulative.begin());
  }

  int uniform_int(int n) noexcept {
    return static_cast<int>(std::min<std::uint64_t>(
        static_cast<std::uint64_t>(uniform() * n), static_cast<std::uint64_t>(n - 1)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace drope
