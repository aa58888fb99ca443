#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

// Seed derivation and distribution helpers. std::normal_distribution and
// friends are implementation-defined, so sampling goes through these fully
// specified routines instead; outputs are reproducible for a given seed on
// any standard library.
namespace bid::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix(mix(a, b), c);
}

// Uniform in [0, 1).
inline double unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * unit(g);
}

// Uniform integer in [0, n). n must be > 0; modulo bias is negligible for
// the small ranges used here.
inline std::uint64_t below(std::mt19937_64& g, std::uint64_t n) {
  return g() % n;
}

// Box-Muller; one draw per call, the paired value is discarded to keep the
// draw count independent of call pattern.
inline double gaussian(std::mt19937_64& g) {
  double u1 = unit(g);
  const double u2 = unit(g);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <class It>
void shuffle(It first, It last, std::mt19937_64& g) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const std::uint64_t j = below(g, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace bid::rng
