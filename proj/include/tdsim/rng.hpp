#pragma once

// Reproducible random streams.
//
// Stream (seed, index) is std::mt19937_64 seeded with
//   splitmix64(splitmix64(seed) ^ splitmix64(index + 0x9E3779B97F4A7C15)).
// mt19937_64 output is fixed by the C++ standard; uniforms are built from the
// top 53 bits, so every platform produces the same doubles.

#include <cmath>
#include <cstdint>
#include <random>

namespace tdsim::rng {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t index = 0) {
  return Engine(stream_seed(seed, index));
}

/// Uniform on [0, 1).
inline double uniform01(Engine& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

/// Exponential waiting time with the given rate.
inline double exponential(Engine& g, double rate) {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform01(g)) / rate;
}

}  // namespace tdsim::rng
