#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace tahp {

// Counter-based 64-bit generator (SplitMix64). The n-th output is a pure
// function of (seed, n), so every consumer of randomness is reproducible
// from the explicit seed in its signature. There is no global RNG state
// anywhere in the library.
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inverse-CDF exponential; 1 - uniform01() lies in (0, 1] so the log is finite.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u = 1.0 - uniform01();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

 private:
  std::uint64_t state_;
};

// Numeric stream labels; numeric rather than strings so reproducibility does
// not depend on any string-hash choice.
namespace streams {
inline constexpr std::uint64_t kParamInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kMcTrain = 4;
inline constexpr std::uint64_t kMcEval = 5;
inline constexpr std::uint64_t kSimulate = 6;
inline constexpr std::uint64_t kSplit = 7;
}  // namespace streams

// Derives an independent child seed from (seed, path). Each path element is
// folded through the SplitMix64 finalizer, so distinct paths give unrelated
// streams.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = RngStream::mix64(seed + RngStream::kGamma);
  for (std::uint64_t k : path) {
    s = RngStream::mix64(s ^ RngStream::mix64(k + RngStream::kGamma));
  }
  return s;
}

inline RngStream derive_stream(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> path) {
  return RngStream(derive_seed(seed, path));
}

}  // namespace tahp
