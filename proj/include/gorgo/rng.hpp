#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "gorgo/types.hpp"

namespace gorgo::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent deterministic stream per (seed, label) so generators never
// perturb each other's draws when one of them is reconfigured.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    return splitmix64(seed ^ fnv1a64(label));
}

// Hand-rolled xoshiro-style engine: std::mt19937_64 is deterministic, but the
// std distributions are not pinned across standard libraries, so all draws go
// through the explicit transforms below.
class Stream {
public:
    explicit Stream(std::uint64_t seed = 1) {
        for (auto& w : s_) {
            seed = splitmix64(seed);
            w = seed;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Exponential with given rate (mean 1/rate).
    double next_exponential(double rate) {
        double u = next_unit();
        return -std::log1p(-u) / rate;
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Lognormal parameterized by its median and log-space sigma.
    double next_lognormal(double median, double sigma) {
        return median * std::exp(sigma * next_normal());
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stateless uniform in [0,1) from a hash of the inputs; used for per-(request,
// hop) jitter so draw order never depends on event processing order.
inline double hashed_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace gorgo::rng
