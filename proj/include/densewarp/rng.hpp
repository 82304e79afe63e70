#pragma once

#include <cstdint>
#include <random>

namespace densewarp {

using Rng = std::mt19937_64;

//! Derive an independent generator for a numbered stream (replication index,
//! fold index, ...) from a master seed. Streams are decorrelated by running
//! the seed material through a splitmix64 round so that neighboring indices
//! do not produce overlapping mt19937_64 state.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace densewarp
