#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rde {

// Counter-based uniform stream: the SplitMix64 output function evaluated at
// key + (counter+1) * golden-ratio increment. Every draw is addressed by
// (key, counter), so parallel consumers can sample any index in any order
// and still produce identical values.
namespace rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
    return mix64(key + (counter + 1) * kGolden);
}

// Fixed mixing rule for subseeds: fold each label into the key with one
// avalanche round. derive(seed, step, sample) gives the per-step,
// per-sample stream key used by the samplers.
inline std::uint64_t derive(std::uint64_t key, std::uint64_t label) {
    return mix64(key ^ (label + 1) * kGolden);
}

inline std::uint64_t derive(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
    return derive(derive(key, a), b);
}

// Uniform in [0,1), 53-bit resolution.
inline double uniform(std::uint64_t key, std::uint64_t counter) {
    return static_cast<double>(at(key, counter) >> 11) * 0x1.0p-53;
}

inline double normal_from(double u1, double u2) {
    // u1 = 0 would send log to -inf; nudge to the smallest representable draw.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Standard normal via Box-Muller. Draw j consumes uniform counters 2j and
// 2j+1; the sine branch is discarded so each index is self-contained.
inline double normal(std::uint64_t key, std::uint64_t counter) {
    return normal_from(uniform(key, 2 * counter), uniform(key, 2 * counter + 1));
}

// Sequential convenience wrapper over the counter stream. Do not mix
// next_normal with the indexed normal() on the same key: they address the
// uniform counters differently.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return at(key_, counter_++); }
    double next_uniform() { return uniform(key_, counter_++); }

    double next_normal() {
        double u1 = next_uniform();
        double u2 = next_uniform();
        return normal_from(u1, u2);
    }

    // Uniform integer in [0, bound) via fixed-point multiply.
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rng
} // namespace rde
