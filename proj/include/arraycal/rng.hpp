#pragma once

#include <cmath>
#include <cstdint>

#include "arraycal/types.hpp"

namespace arraycal {

// Self-contained PRNG so that measurement synthesis is bit-reproducible for a
// given seed regardless of platform or standard library. (std::normal_distribution
// is implementation-defined.)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix_bits(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

/// Derives an independent stream from (seed, stream id, index). Sampling for
/// step k never depends on how many draws earlier steps consumed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) {
  return mix_bits(seed + 0x9e3779b97f4a7c15ULL * (stream + 1)) ^
         mix_bits(index + 0x2545f4914f6cdd1dULL);
}

/// Standard-normal draws via Box-Muller (one uniform pair per draw; no state
/// beyond the underlying generator).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - rng_.next_double();
    const double u2 = rng_.next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * EIGEN_PI * u2);
  }

  VecXd next_vector(Eigen::Index n) {
    VecXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = next();
    return v;
  }

 private:
  SplitMix64 rng_;
};

}  // namespace arraycal
