#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dudesim/types.hpp"

namespace dudesim {

// Deterministic random layer. Standard-library distributions are
// implementation-defined, so every draw here is spelled out: splitmix64
// for bits, Box-Muller for normals, the inversion product for Poisson.
// Identical seeds give identical streams on every build of this code.

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Folds integer tags into a base seed; used to give each (purpose, id...)
// tuple its own independent stream. Order of tags is significant.
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
  std::uint64_t h = mix64(base + 0x9E3779B97F4A7C15ULL);
  ((h = mix64(h ^ (static_cast<std::uint64_t>(tags) + 0x9E3779B97F4A7C15ULL))), ...);
  return h;
}

class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix64(z);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_double_in(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double next_normal() {
    double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform index in [0, n), rejection-sampled so the result is exact.
  std::size_t next_index(std::size_t n) {
    if (n == 0) throw ValidationError("next_index: n must be positive");
    std::uint64_t span = static_cast<std::uint64_t>(n);
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % span);
  }

  // Poisson by the inversion product method. Means large enough to
  // underflow exp(-mean) are split in halves; the sum of independent
  // Poisson draws is Poisson in the combined mean.
  int next_poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean))
      throw ValidationError("next_poisson: mean must be finite and non-negative");
    if (mean == 0.0) return 0;
    if (mean > 600.0) {
      double half = mean / 2.0;
      return next_poisson(half) + next_poisson(mean - half);
    }
    double l = std::exp(-mean);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= next_double();
    } while (p > l);
    return k - 1;
  }

  // Fisher-Yates using this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace dudesim
