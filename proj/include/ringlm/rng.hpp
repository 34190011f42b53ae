#pragma once

#include <cmath>
#include <cstdint>

namespace ringlm {

// SplitMix64: the project's fixed deterministic generator. Every piece of
// randomness in the system (weight init, temperature sampling) flows through
// this so that a (seed, config) pair reproduces bit-identical results on a
// given platform, independent of the C++ standard library implementation.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two draws per call.
    float next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) {
            u1 = 0x1.0p-53;
        }
        const double two_pi = 6.283185307179586476925286766559;
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2));
    }

private:
    std::uint64_t state_;
};

} // namespace ringlm
