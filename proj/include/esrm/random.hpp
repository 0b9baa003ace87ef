#pragma once

#include <cstdint>
#include <random>

namespace esrm {

// SplitMix64 output function (Steele, Lea & Flood 2014; constants from Vigna's
// reference implementation).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = UINT64_C(0x9E3779B97F4A7C15);

/// Seed for stream `index` of a family rooted at `master`. Pure function of
/// its arguments, so streams can be created in any order or on any thread.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) + (index + 1) * kGoldenGamma);
}

/// Stream of uniforms on the open interval (0,1).
///
/// Backed by std::mt19937_64, whose raw output sequence is fixed by the
/// standard; uniforms are (k + 0.5) / 2^53 for the top 53 bits k, so the
/// stream is bit-identical on every conforming platform and never yields
/// 0 or 1.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  double next() noexcept {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  double operator()() noexcept { return next(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace esrm
