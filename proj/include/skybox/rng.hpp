#pragma once

#include <cstdint>
#include <random>

namespace skybox {

// Deterministic draws on top of mt19937_64. The standard distribution objects
// are implementation-defined, so replay-sensitive code uses these instead.

inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen()) * n) >> 64);
}

}  // namespace skybox
