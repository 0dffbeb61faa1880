#pragma once

#include <cstdint>

namespace entdecon {

// Counter-based generator. Draw k (k = 1, 2, ...) of stream `seed` is
//
//   z = seed + k * 0x9E3779B97F4A7C15          (mod 2^64)
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   out = z ^ (z >> 31)
//
// i.e. the SplitMix64 finalizer applied to a Weyl counter. Any draw can be
// recomputed from (seed, k) alone, which is what other implementations need
// to reproduce a stream.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kMix1 = 0xBF58476D1CE4E5B9ULL;
  static constexpr std::uint64_t kMix2 = 0x94D049BB133111EBULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  static std::uint64_t at(std::uint64_t seed, std::uint64_t k) noexcept {
    std::uint64_t z = seed + k * kGolden;
    z = (z ^ (z >> 30)) * kMix1;
    z = (z ^ (z >> 27)) * kMix2;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept { return at(seed_, ++counter_); }

  // Uniform on the open interval (0, 1): ((u >> 11) + 0.5) * 2^-53.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by inverse CDF of one uniform draw.
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double u);

}  // namespace entdecon
