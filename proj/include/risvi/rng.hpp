#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

#include "risvi/types.hpp"

namespace risvi {

// Counter-free deterministic random stream (xoshiro256** core, splitmix64
// seeding). Every parallel task derives its own child stream, so results do
// not depend on the number of worker threads.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : origin_(seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
        has_spare_ = false;
        spare_ = 0.0;
    }

    // Independent stream derived from (this stream's seed, tag). Derivation
    // only hashes the original seed material, never the consumption state.
    RandomStream child(std::uint64_t tag) const {
        std::uint64_t x = origin_ ^ (0x9E3779B97F4A7C15ULL * (tag + 1));
        return RandomStream(splitmix64(x));
    }

    RandomStream child(std::string_view name) const {
        std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
        for (char c : name) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 1099511628211ULL;
        }
        return child(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (the spare is cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(kTwoPi * u2);
        has_spare_ = true;
        return r * std::cos(kTwoPi * u2);
    }

    // Circularly-symmetric complex normal CN(0, 1).
    cxd cnormal() {
        const double re = normal();
        const double im = normal();
        return cxd(re * M_SQRT1_2, im * M_SQRT1_2);
    }

    std::uint64_t origin() const { return origin_; }

  private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix64(std::uint64_t&& x) {
        std::uint64_t y = x;
        return splitmix64(y);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4] = {};
    std::uint64_t origin_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace risvi
