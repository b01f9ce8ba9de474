/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cmath>
#include <cstdint>

namespace gsr {

// Counter-based deterministic generator (splitmix64 core). Unlike the
// std:: distributions, every draw is bit-identical across platforms and
// standard library versions, which the reproducibility contracts depend on.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    float uniform_f() { return static_cast<float>(uniform()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // integer in [lo, hi] inclusive
    int64_t range(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // standard normal via Box-Muller (one value per call, no cached state)
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float normal_f() { return static_cast<float>(normal()); }

private:
    uint64_t state_;
};

// Derive an independent stream from a root seed and a role tag. Used so the
// draw order of one pipeline stage cannot perturb another.
inline uint64_t derive_seed(uint64_t root, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    Rng mix(root ^ (a * 0xA24BAED4963EE407ull) ^ (b * 0x9FB21C651E98DF25ull) ^
            (c * 0xD6E8FEB86659FD93ull));
    return mix.next_u64();
}

}  // namespace gsr
