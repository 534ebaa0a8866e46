#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace spq::rng {

// SplitMix64 finalizer; good avalanche, cheap enough to call per draw.
constexpr inline uint64_t mix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

// Disjoint scenario index spaces. Draws keyed by (seed, tuple, attr, purpose,
// scenario, counter) are order-independent, so parallel generation is
// bit-reproducible.
enum class Purpose : uint64_t {
    Params = 1,   // per-tuple prior draws at dataset generation time
    Opt = 2,      // optimization scenarios (the doubling stream)
    Val = 3,      // validation scenarios
    Test = 4,     // independent robustness re-verification
    Offline = 5,  // partitioning MAD scenarios
    Cdf = 6,      // histogram CDF construction samples
    Gamma = 7,    // duplicate risk-drop simulation
};

struct Key {
    uint64_t seed = 0;
    uint64_t tid = 0;
    uint64_t attr = 0;
    uint64_t purpose = 0;

    Key() = default;
    Key(uint64_t s, uint64_t t, std::string_view a, Purpose p)
        : seed(s), tid(t), attr(fnv1a(a)), purpose(static_cast<uint64_t>(p)) {}
    Key(uint64_t s, uint64_t t, uint64_t a, Purpose p)
        : seed(s), tid(t), attr(a), purpose(static_cast<uint64_t>(p)) {}

    uint64_t word(uint64_t scenario, uint64_t ctr) const {
        uint64_t h = mix64(seed ^ 0x9E3779B97F4A7C15ull);
        h = mix64(h ^ tid);
        h = mix64(h ^ attr);
        h = mix64(h ^ purpose);
        h = mix64(h ^ scenario);
        return mix64(h ^ ctr);
    }

    // uniform on (0, 1]; never 0 so log() is safe
    double u01(uint64_t scenario, uint64_t ctr) const {
        return ((word(scenario, ctr) >> 11) + 1.0) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; each ctr consumes two uniforms
    double normal(uint64_t scenario, uint64_t ctr) const {
        double u1 = u01(scenario, 2 * ctr);
        double u2 = u01(scenario, 2 * ctr + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }
};

}  // namespace spq::rng
