#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace arw {

/// Deterministic splittable RNG (splitmix64 core). The same seed produces
/// the same stream on every platform, which the benchmark harness relies on
/// for byte-identical reports; std::uniform_real_distribution makes no such
/// promise. fork() derives independent child streams from the construction
/// seed, so the draw order of one stream never shifts another.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

    Rng fork(uint64_t tag) const {
        uint64_t s = seed_ + 0x9E3779B97F4A7C15ULL * (tag + 1);
        return Rng(mix(mix(s) ^ 0xD1B54A32D192ED03ULL));
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (two uniforms per draw, no cached
    /// spare, so the stream position stays easy to reason about).
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n) (Lemire reduction).
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[below(i)]);
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t state_;
};

}  // namespace arw
