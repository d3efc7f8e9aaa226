#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "rmtcluster/linalg.hpp"

namespace rmtcluster {

// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream tags keep substreams of different experiments apart.
enum class StreamTag : std::uint64_t {
    placement = 1,
    shadowing = 2,
    channels = 3,
    gaussian = 4,
    conditional = 5,
};

// Seeded generator with a portable uniform and Box-Muller normals, so that
// draws are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Substream keyed by (seed, tag, a, b).
    static Rng substream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                         std::uint64_t b = 0) {
        std::uint64_t h = mix64(seed);
        h = mix64(h ^ static_cast<std::uint64_t>(tag));
        h = mix64(h ^ a);
        h = mix64(h ^ b);
        return Rng(h);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1].
    double uniform_open0() { return 1.0 - uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
        const double phi = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    // Circular complex Gaussian with E|z|^2 = 1.
    cplx complex_normal() {
        const double re = normal();
        const double im = normal();
        return {re * M_SQRT1_2, im * M_SQRT1_2};
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rmtcluster
