#pragma once

#include <cmath>
#include <cstdint>

#include "omfb/matrix.hpp"

namespace omfb {

/// splitmix64; used to expand seeds into engine state and to derive
/// independent sub-seeds.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// xoshiro256++ 1.0 (Blackman/Vigna). Fixed algorithm so seeded streams
/// reproduce across platforms; integer draws use only integer arithmetic.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& word : s_) word = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, n); rejection sampling.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_below: n must be positive");
    const std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    const double u1 = double((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = double(next() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/// Independent sub-seed for a named stream, so e.g. dictionary initialization
/// and column sampling never share draws and different algorithms see the
/// same column stream under one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 sm(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  sm.next();
  return sm.next();
}

// Stream ids shared by every run function.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kSampleStream = 2;

/// rows x cols matrix of i.i.d. standard normals.
Matrix normal_matrix(Index rows, Index cols, std::uint64_t seed);

}  // namespace omfb
