#pragma once

#include <cstdint>

#include "sencache/linalg.hpp"

namespace sencache {

// SplitMix64 stream; used to expand user seeds into generator state and to
// derive independent per-sample seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// PCG32 (XSH-RR) seeded through SplitMix64. All randomness in the project
// flows through this generator so runs are bit-reproducible for a given seed.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed) {
        std::uint64_t sm = seed;
        const std::uint64_t init_state = splitmix64(sm);
        const std::uint64_t init_seq = splitmix64(sm);
        inc_ = (init_seq << 1u) | 1u;
        state_ = 0u;
        next_u32();
        state_ += init_state;
        next_u32();
    }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_unit() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return static_cast<double>(((hi << 32u) | lo) >> 11u) * 0x1.0p-53;
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

// Standard normal draws via the Box-Muller transform over a Pcg32 stream.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

    double next();

    Vec vector(std::size_t dim) {
        Vec v(dim);
        for (auto& x : v) x = next();
        return v;
    }

private:
    Pcg32 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sencache
