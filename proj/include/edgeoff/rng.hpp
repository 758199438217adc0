#pragma once

#include <cstdint>
#include <random>

namespace edgeoff {

/// Every stochastic path in the project draws from this engine, seeded
/// explicitly. No wall-clock or OS entropy is used anywhere.
using Rng = std::mt19937_64;

/// Derives an independent child seed from a parent seed and a stream index
/// (splitmix64 finalizer). Used to give trees, episodes and evaluation runs
/// their own reproducible streams.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  std::uint64_t z = parent + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace edgeoff
