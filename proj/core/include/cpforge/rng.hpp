#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpforge {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed for a named component from the run seed,
/// so every consumer of randomness is reproducible from one 64-bit value.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : component) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

inline Rng make_rng(std::uint64_t seed, std::string_view component) {
  return Rng(derive_seed(seed, component));
}

}  // namespace cpforge
