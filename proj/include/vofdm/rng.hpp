#pragma once

#include <cstdint>
#include <random>

#include "vofdm/types.hpp"

namespace vofdm {

/// Counter-based substream derivation: trial t of a run seeded with s draws from
/// Rng(s).substream(t), so parallel trials are bit-reproducible regardless of
/// scheduling. Substreams are derived from the *seed*, never from engine state.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(mix(seed)) {}

    Rng substream(std::uint64_t stream) const {
        return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ull)));
    }

    std::uint64_t seed() const { return seed_; }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_u64(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
    }

    double normal() { return norm_(eng_); }

    /// CN(0, variance): real and imaginary parts iid N(0, variance/2).
    Complex cnormal(double variance) {
        const double s = std::sqrt(variance * 0.5);
        return {s * norm_(eng_), s * norm_(eng_)};
    }

    /// Random odd sigma in {1, 3, ..., n-1}; n must be a power of two >= 2.
    std::uint64_t odd_sigma(std::uint64_t n) { return 2 * uniform_u64(n / 2) + 1; }

    std::mt19937_64& engine() { return eng_; }

    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace vofdm
