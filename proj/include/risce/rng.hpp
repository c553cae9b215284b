#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "risce/tensor.hpp"

namespace risce {

namespace detail {

// splitmix64 finalizer; decorrelates nearby seeds before they reach the
// engine.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Deterministic random stream keyed by (master_seed, stream_id).
///
/// Equal keys replay the same sequence on every platform: the engine is
/// mt19937_64 and all samplers are implemented here instead of relying on
/// std distributions, whose output is implementation-defined.
class RngStream {
public:
    explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0)
        : master_seed_(master_seed), stream_id_(stream_id) {
        const std::uint64_t a = detail::mix64(master_seed);
        const std::uint64_t b = detail::mix64(stream_id ^ 0x5851f42d4c957f2dULL);
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound); rejection sampling, no modulo bias.
    std::uint64_t uniform_index(std::uint64_t bound) {
        if (bound == 0)
            throw dimension_error("RngStream::uniform_index: bound must be positive");
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t rem = (max % bound + 1) % bound;
        const std::uint64_t limit = max - rem;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v > limit);
        return v % bound;
    }

    /// One draw from CN(0, variance): real and imaginary parts are
    /// independent N(0, variance / 2) via Box-Muller.
    cxd complex_gaussian(double variance) {
        if (variance < 0.0)
            throw dimension_error("RngStream::complex_gaussian: negative variance");
        const double u = 1.0 - uniform(); // (0, 1], keeps the log finite
        const double theta = 2.0 * std::numbers::pi * uniform();
        const double r = std::sqrt(-2.0 * std::log(u)) * std::sqrt(variance / 2.0);
        return {r * std::cos(theta), r * std::sin(theta)};
    }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

} // namespace risce
