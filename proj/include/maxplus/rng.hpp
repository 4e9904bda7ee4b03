#pragma once

#include <cstdint>

namespace maxplus {

// splitmix64 (Steele/Lea/Flood mixing constants). Chosen over std::mt19937
// because the bit stream is pinned by these five lines, not by a library
// implementation, so datasets regenerate identically on any platform.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit constexpr SplitMix64(std::uint64_t seed) : state(seed) {}

    constexpr std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform index in {0, ..., n-1}. The clamp guards the (measure-zero in
    // practice, impossible with 53-bit u01 < 1) edge u01 * n == n.
    std::size_t pick(std::size_t n) {
        const auto k = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }
};

} // namespace maxplus
