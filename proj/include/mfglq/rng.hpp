#pragma once

#include <cmath>
#include <cstdint>

namespace mfglq {

// Deterministic per-stream random numbers: xoshiro256++ seeded through
// splitmix64 from (seed, stream). Streams indexed by path (or replication)
// make parallel scheduling irrelevant to the results.

inline uint64_t splitmix64_next(uint64_t& s) {
    uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    Rng(uint64_t seed, uint64_t stream) {
        uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
        for (auto& w : state_) w = splitmix64_next(s);
        has_spare_ = false;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in (0,1); 53-bit mantissa, never exactly 0.
    double uniform() {
        return ((next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal via Box-Muller (pairwise, deterministic draw count).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_;
};

} // namespace mfglq
