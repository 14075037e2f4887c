#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <cmath>

namespace forge {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a, used to derive named seed streams ("stage1", token buckets, ...).
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic RNG. Uniform and normal draws are generated by explicit
// formulas over mt19937_64 output rather than std distributions, so streams
// are reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : base_seed_(seed), gen_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; two uniforms per draw, no caching, so
    // the draw count is a fixed function of call count.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Independent child stream; stable under reordering of sibling forks.
    Rng fork(std::uint64_t stream) const {
        return Rng(splitmix64(base_seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
    }
    Rng fork(std::string_view tag) const { return fork(hash_tag(tag)); }

    std::uint64_t base_seed() const { return base_seed_; }

private:
    std::uint64_t base_seed_;
    std::mt19937_64 gen_;
};

}  // namespace forge
