#pragma once

#include <cstdint>
#include <random>

namespace dealmvc {

// splitmix64 finalizer; used to derive independent, well-mixed RNG streams
// from one user-facing seed (init, shuffling, k-means, ... each get their
// own stream so changing one consumer does not perturb the others).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace rng_stream {
constexpr std::uint64_t init = 1;
constexpr std::uint64_t shuffle = 2;
constexpr std::uint64_t synthetic = 3;
constexpr std::uint64_t kmeans = 4;
}  // namespace rng_stream

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(stream)));
}

}  // namespace dealmvc
