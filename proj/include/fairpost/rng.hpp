#pragma once

#include <cstdint>
#include <vector>

namespace fairpost {

// Deterministic generator used everywhere seeds matter. Standard-library
// distributions are implementation-defined, so all draws below are spelled
// out explicitly; results are identical across compilers and platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, bound) without modulo bias (rejection sampling).
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-sensitive combine for keyed random streams (sample id, branch, seed).
inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    h = mix64(h ^ a);
    h = mix64(h * 0xff51afd7ed558ccdULL ^ b);
    h = mix64(h * 0xc4ceb9fe1a85ec53ULL ^ c);
    return h;
}

// One-shot uniform in [0, 1) for a keyed draw.
inline double keyed_uniform(std::uint64_t sample_id, std::uint64_t branch, std::uint64_t seed) {
    return static_cast<double>(hash_key(sample_id, branch, seed) >> 11) * 0x1.0p-53;
}

// Fisher-Yates with explicit draws; std::shuffle is not portable across
// standard libraries.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, SplitMix64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace fairpost
