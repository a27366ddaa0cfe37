#pragma once

#include <cstdint>
#include <random>

namespace psw {

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the i-th work item (trajectory, cycle, ...) under a base seed and a
// stream tag, so that different stages never share random streams.
constexpr std::uint64_t child_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) + index);
}

using Rng = std::mt19937_64;

// Uniform in (0, 1].
template <typename URNG>
double uniform_open_closed(URNG& rng) {
  return 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace psw
