#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace evfair {

/// Seeded RNG with hand-rolled draw helpers so that results do not depend on
/// standard-library distribution internals. mt19937_64 itself is fully
/// specified by the standard, so streams are reproducible everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Exponential with rate lambda (mean 1/lambda) by inverse CDF.
    double exponential(double lambda) {
        double u;
        do {
            u = uniform01();
        } while (u >= 1.0); // paranoia; uniform01 < 1 already
        return -std::log1p(-u) / lambda;
    }

    /// Uniform integer in [0, n), n >= 1. Rejection-free multiply-shift.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform01() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 gen_;
};

/// SplitMix64 step; used to derive independent per-run seeds from a master
/// seed without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace evfair
