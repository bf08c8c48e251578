#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bugsmc {

using Rng = std::mt19937_64;

/// Default seed used whenever the caller does not supply one.
inline constexpr std::uint64_t kDefaultSeed = 20150101u;

/// Uniform draw on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform draw on (0, 1).
inline double uniform_open(Rng& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  return u;
}

/// Standard normal draw (Marsaglia polar method, one value per call).
inline double standard_normal(Rng& rng) {
  double u, v, s;
  do {
    u = 2.0 * uniform01(rng) - 1.0;
    v = 2.0 * uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

inline double standard_exponential(Rng& rng) { return -std::log(uniform_open(rng)); }

/// Gamma(shape, 1) draw (Marsaglia-Tsang).
double standard_gamma(Rng& rng, double shape);

/// SplitMix64 finalizer; derives independent seeds from (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace bugsmc
