// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace kbsynth {

// Uniform in [0,1) from the top 53 bits; stable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform integer in [0,n) by rejection; n > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

// Fisher-Yates with uniform_below so shuffles match across platforms.
template <typename It>
void stable_shuffle(It first, It last, std::mt19937_64& rng) {
  for (auto n = last - first; n > 1; --n) std::iter_swap(first + (n - 1), first + uniform_below(rng, n));
}

}  // namespace kbsynth
