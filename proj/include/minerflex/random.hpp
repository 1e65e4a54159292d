#pragma once

#include <cstdint>
#include <random>

namespace minerflex {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits. Used instead of
// std::uniform_real_distribution so streams are identical across standard
// library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Derives an independent stream seed from a master seed and a tag
// (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t tag = 0) {
  return Rng(derive_seed(seed, tag));
}

}  // namespace minerflex
