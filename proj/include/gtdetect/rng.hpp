#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace gtdetect {

// Deterministic random source: a seeded mt19937_64 with explicit uniform and
// Box-Muller normal transforms, so a stream depends only on the seed and the
// call sequence, never on the platform's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    static constexpr const char* algorithm() { return "mt19937_64+boxmuller"; }

    std::uint64_t seed() const { return seed_; }

    // Independent child stream; distinct stream ids give unrelated seeds.
    Rng fork(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ mix(0x9e3779b97f4a7c15ULL + stream)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal; always consumes exactly two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace gtdetect
