#pragma once

#include <cstdint>
#include <random>

namespace strol {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for item `index` of a stream rooted at `base` (base XOR index, then mixed).
/// Independent of the order in which items are generated.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return splitmix64(base ^ index); }

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace strol
