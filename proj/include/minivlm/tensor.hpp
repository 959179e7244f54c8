#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace minivlm {

/// Row-major dense matrix of 64-bit reals. Sequences are stored one token per row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of the generator, so the
/// sequence is identical on every standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Integer in [0, n) without modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Fills `m` with U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
void init_uniform_fan_in(Mat& m, Eigen::Index fan_in, Rng& rng);

}  // namespace minivlm
