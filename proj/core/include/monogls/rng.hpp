#pragma once

#include <cstdint>
#include <random>

namespace monogls {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the id-th child stream of seed. Depends only on (seed, id).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t id) noexcept {
  return mix64(mix64(seed) ^ mix64(id + 0x632be59bd9b4e019ULL));
}

inline Rng stream(std::uint64_t seed, std::uint64_t id) {
  return Rng(stream_seed(seed, id));
}

}  // namespace monogls
