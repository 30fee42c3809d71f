#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

/**
 * Counter-based random numbers.
 *
 * Every draw is a pure function of (seed, stream, counter), so any sub-run
 * of an experiment can be regenerated on its own and in any order. The mixer
 * is SplitMix64's finaliser applied to a keyed counter.
 */
namespace chaoslab::rng {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive a child seed from a parent seed and up to three labels.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
  std::uint64_t h = mix64(parent ^ 0x6A09E667F3BCC909ULL);
  h = mix64(h ^ a);
  h = mix64(h ^ (b + 0xBB67AE8584CAA73BULL));
  return mix64(h ^ (c + 0x3C6EF372FE94F82BULL));
}

/// Uniform double in (0, 1); never returns 0 so logs are safe.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

constexpr double uniform(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t counter) noexcept {
  return to_open_unit(derive_seed(seed, stream, counter));
}

/// Pair of independent standard normals by Box-Muller on two keyed uniforms.
inline std::pair<double, double> normal_pair(std::uint64_t seed,
                                             std::uint64_t stream,
                                             std::uint64_t counter) noexcept {
  const double u1 = to_open_unit(derive_seed(seed, stream, counter, 1));
  const double u2 = to_open_unit(derive_seed(seed, stream, counter, 2));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Sequential generator over the same keyed construction.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double uniform() noexcept { return rng::uniform(seed_, stream_, counter_++); }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    auto [a, b] = normal_pair(seed_, stream_, counter_++);
    spare_ = b;
    has_spare_ = true;
    return a;
  }

  std::uint64_t next_bits() noexcept { return derive_seed(seed_, stream_, counter_++, 7); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Radical inverse in base `base`; the low-discrepancy sequence behind the drift nets.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) noexcept {
  double inv = 1.0 / base;
  double factor = inv;
  double value = 0.0;
  while (index > 0) {
    value += static_cast<double>(index % base) * factor;
    index /= base;
    factor *= inv;
  }
  return value;
}

}  // namespace chaoslab::rng
