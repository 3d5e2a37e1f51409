#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dilo {

// Deterministic RNG used everywhere instead of std::*_distribution: the
// standard leaves distribution algorithms implementation-defined, and the
// reproducibility contract (byte-identical metrics across runs and toolchains)
// needs the exact draw sequence pinned. mt19937_64 itself is fully specified.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform double in [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform double in [lo,hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0,n). Multiply-shift map; the bias of ~n/2^64 is
    // far below anything observable at desk scale, and the mapping is exact
    // and portable.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    // Standard normal via Box-Muller, caching the second draw.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard u1 = 0; log(0) would produce inf.
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream, e.g. one per evaluation episode.
    Rng fork(std::uint64_t salt) {
        std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ull * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dilo
