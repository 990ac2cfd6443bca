#pragma once

#include <cstdint>
#include <random>

namespace utopic {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; decorrelates (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for worker/sample `index` of a run seeded with `seed`.
inline Rng stream_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  return Rng(mix64(mix64(seed ^ mix64(salt)) + index));
}

}  // namespace utopic
