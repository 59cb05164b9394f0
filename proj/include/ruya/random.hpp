#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace ruya {

// std::uniform_*_distribution output differs between standard libraries, so
// everything that ends up in a trace draws through these helpers instead.
// std::mt19937_64 itself is fully specified by the standard.
using Rng = std::mt19937_64;

// Unbiased integer in [0, bound) via rejection on the top of the range.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal through Box-Muller; platform-stable given the engine.
inline double standard_normal(Rng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Draws `count` distinct elements (order of drawing preserved) by partial Fisher-Yates.
template <typename T>
std::vector<T> sample_without_replacement(Rng& rng, std::span<const T> pool, std::size_t count) {
  std::vector<T> work(pool.begin(), pool.end());
  if (count > work.size()) count = work.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, work.size() - i));
    std::swap(work[i], work[j]);
  }
  work.resize(count);
  return work;
}

}  // namespace ruya
