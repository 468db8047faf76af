#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <span>

namespace otl {

using RandomStream = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream splitting rule: the seed of trial `trial` under master seed `master`
// is splitmix64(splitmix64(master) ^ splitmix64(trial + 1)). The trial index
// alone decides the stream, so results never depend on scheduling order.
inline constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(splitmix64(master) ^ splitmix64(trial + 1));
}

inline RandomStream make_stream(std::uint64_t seed) { return RandomStream(seed); }

inline RandomStream trial_stream(std::uint64_t master, std::uint64_t trial) {
  return make_stream(trial_seed(master, trial));
}

// FNV-1a over raw doubles; used to show two arms consumed identical data.
inline std::uint64_t checksum(std::span<const double> values, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFFU;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace otl
