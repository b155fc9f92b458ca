#pragma once

#include <cstdint>
#include <random>

namespace segbench {

/// splitmix64 finaliser; decorrelates adjacent seeds before they reach a
/// Mersenne Twister.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(seed ^ mix_seed(stream));
}

using Rng = std::mt19937_64;

}  // namespace segbench
