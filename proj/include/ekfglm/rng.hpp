// Seeded, splittable PRNG for reproducible simulation streams.
//
// xoshiro256++ core with splitmix64 state expansion. Substreams are derived
// by hashing (seed, tag, index) so that adding an algorithm or a worker never
// perturbs the data streams of existing ones. Distributions are implemented
// here rather than taken from <random> because libstdc++/libc++ disagree on
// normal_distribution output, which would break bitwise reproducibility of
// recorded streams.
#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string_view>

namespace ekfglm {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t acc, std::uint64_t word) {
    std::uint64_t s = acc ^ (word + 0x9e3779b97f4a7c15ull + (acc << 6) + (acc >> 2));
    return splitmix64(s);
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = detail::splitmix64(sm);
        have_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    // Substream derivation: a pure hash of (seed, tag, index). Streams with
    // distinct tags or indices are statistically independent.
    static std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        std::uint64_t acc = detail::mix(0x353d5f8f8f4aa2b1ull, seed);
        for (char c : tag) acc = detail::mix(acc, static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
        acc = detail::mix(acc, index);
        return acc;
    }

    static Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        return Rng(derive(seed, tag, index));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // ±1 with equal probability.
    double rademacher() { return (next_u64() & 1ull) ? 1.0 : -1.0; }

    // Standard normal via the Marsaglia polar method (sqrt/log only, no
    // trigonometry; libm log is deterministic on a fixed machine).
    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        cached_normal_ = v * m;
        have_cached_normal_ = true;
        return u * m;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Order-sensitive checksum of a double stream; used to assert that paired
// algorithm runs consumed identical observations.
class StreamChecksum {
public:
    void add(double value) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(value));
        __builtin_memcpy(&bits, &value, sizeof(bits));
        acc_ = detail::mix(acc_, bits);
    }

    template <typename Container>
    void add_range(const Container& values) {
        for (double v : values) add(v);
    }

    std::uint64_t value() const { return acc_; }

private:
    std::uint64_t acc_ = 0x2545f4914f6cdd1dull;
};

} // namespace ekfglm
