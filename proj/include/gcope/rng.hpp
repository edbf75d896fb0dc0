#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gcope {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for a stream identified by (root, a, b, ...). Order matters.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = mix_seed(root);
  for (auto p : parts) s = mix_seed(s ^ mix_seed(p + 0x632BE59BD9B4E019ULL));
  return s;
}

}  // namespace gcope
