#pragma once

#include <cmath>
#include <cstdint>

#include "skipdiff/latent.hpp"

namespace skipdiff::rng {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(s);
}

// Counter-based stream: the generator state is derived from a key alone, so
// draws for (seed, step) never depend on how many draws other steps made.
// Gaussians come from Box-Muller over splitmix64 uniforms; <random>'s
// normal_distribution is implementation-defined and would break bit-exact
// golden files across standard libraries.
class Stream {
public:
    explicit Stream(uint64_t key) : state_(key) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in (0, 1]
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_gaussian(Vec& v) {
        for (double& x : v) x = gaussian();
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream keyed by (run seed, step index): skipping decisions never perturb
// the noise draws of later steps.
inline Stream step_stream(uint64_t seed, uint64_t step) {
    return Stream(mix(seed, mix(step, 0x5d1f0e7a3c9b2486ULL)));
}

// Stream for the initial latent x_T, distinct from every per-step key.
inline Stream init_stream(uint64_t seed) {
    return Stream(mix(seed, 0xa02b9fe5e4c0a71dULL));
}

// Per-run seeds from one master seed; stable under reordering of runs.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix(master, mix(index, 0xc6a4a7935bd1e995ULL));
}

}  // namespace skipdiff::rng
