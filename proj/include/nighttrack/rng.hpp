#pragma once

#include <cmath>
#include <cstdint>

namespace nighttrack {

// Deterministic splitmix64 stream. Every random draw in the project goes
// through this class so any output is reproducible byte-for-byte from a seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : base_(seed), state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), n > 0. Rejection sampling keeps the draw unbiased.
    int64_t uniform_int(int64_t n) {
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<int64_t>(x % un);
    }

    // Box-Muller; the second variate is discarded so the stream carries no
    // hidden cache state across calls.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(1.0 - u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Normal(0, sigma) with resampling outside two sigma.
    double trunc_normal(double sigma) {
        double z = normal();
        while (std::abs(z) > 2.0) z = normal();
        return z * sigma;
    }

    // Independent stream derived from the original seed (not the current
    // state), so fork(i) does not depend on how many draws happened before.
    Rng fork(uint64_t stream) const {
        uint64_t z = base_ ^ (0xD1B54A32D192ED03ull * (stream + 0x632BE59BD9B4E019ull));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

private:
    uint64_t base_;
    uint64_t state_;
};

}  // namespace nighttrack
