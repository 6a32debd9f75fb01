#pragma once

#include <cstdint>
#include <random>

namespace csolab {

// splitmix64 finalizer; decorrelates nearby integer seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic seed stream: every trial seed is a pure function of
// (master, stream, index). No global RNG state is shared between trials.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1))) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

} // namespace csolab
