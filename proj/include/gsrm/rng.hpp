#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace gsrm {

// Deterministic PRNG with hand-rolled draws. std::shuffle and the standard
// distributions are implementation-defined, which would break byte-for-byte
// reproducibility of seeded pipelines, so nothing here touches <random>.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, bound), bound >= 1. Rejection sampling keeps the
    // draw unbiased without relying on library modular tricks.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = ~0ull - (~0ull % bound);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % bound;
    }

    // Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller; caches the second value.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = std::size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent stream from (seed, tag...) without sharing state.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ull + tag * 0xd1b54a32d192ed03ull));
        return r.next_u64();
    }

    static std::uint64_t hash_bytes(std::string_view s, std::uint64_t seed = 0x811c9dc5ull) {
        // FNV-1a 64, folded through splitmix for avalanche.
        std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return mix(h, 0);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace gsrm
