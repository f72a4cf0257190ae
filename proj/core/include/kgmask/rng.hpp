#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace kgmask {

// All sampling goes through this wrapper instead of <random> distributions:
// the mt19937_64 engine is specified bit-exactly by the standard, while the
// distribution classes are not. Keeping the mapping from raw engine output
// to samples in our own code makes every artifact byte-identical across
// compilers and standard libraries.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t uniform_index(uint64_t n) {
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Geometric on support {1, 2, ...}: number of Bernoulli(p) trials up to
    // and including the first success.
    int64_t geometric(double p) {
        const double u = next_double();
        const double g = std::floor(std::log1p(-u) / std::log1p(-p));
        if (!(g >= 0.0) || g > 1e18) return 1; // u rounded to 1.0 edge case
        return 1 + static_cast<int64_t>(g);
    }

    // Index draw with probability proportional to weights[i]. Weights must be
    // nonnegative with a positive sum.
    size_t weighted_index(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = next_double() * total;
        double cum = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            cum += weights[i];
            if (u < cum) return i;
        }
        return weights.size() - 1;
    }

  private:
    std::mt19937_64 engine_;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable per-document seed: independent of scheduling and of other documents.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view doc_id) {
    return splitmix64(splitmix64(global_seed) ^ fnv1a64(doc_id));
}

} // namespace kgmask
