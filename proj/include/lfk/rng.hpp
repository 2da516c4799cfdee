#pragma once

#include <cstdint>
#include <cmath>
#include <random>

#include "lfk/geom3.hpp"

namespace lfk {

/// Deterministic RNG with explicit transforms so that streams are
/// reproducible across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    /// Independent substream: same (seed, stream) always yields the same sequence.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        // splitmix64 of the pair
        uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        x = x ^ (x >> 31);
        return Rng(x);
    }

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0,1).
    double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    /// Standard normal via Box-Muller (cached spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 normal3() { return {normal(), normal(), normal()}; }

    Vec3 unit_vector() {
        Vec3 v = normal3();
        double n = norm(v);
        while (n < 1e-12) {
            v = normal3();
            n = norm(v);
        }
        return v / n;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lfk
