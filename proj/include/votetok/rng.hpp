#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace votetok {

// All randomness in an experiment flows from one root seed. Components pull
// independent streams by deriving sub-seeds with a label ("corpus", "noise",
// "init", "routing", "mc", ...), so any stage can be replayed in isolation.
inline uint64_t derive_seed(uint64_t root, std::string_view label) {
    // FNV-1a over the label bytes mixed into the root, splitmix64 finalizer.
    uint64_t h = 14695981039346656037ull ^ root;
    for (char c : label) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ull;
    }
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline uint64_t derive_seed(uint64_t root, std::string_view label, uint64_t index) {
    return derive_seed(derive_seed(root, label), "#") ^ derive_seed(index, label);
}

// mt19937_64 core with hand-rolled conversions. The engine is specified
// bit-exactly by the standard and the conversions below avoid the
// implementation-defined std::*_distribution adaptors, so a seed produces
// the same stream on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Inclusive integer range, rejection sampled (no modulo bias).
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<int64_t>(gen_());  // full 64-bit span
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t draw;
        do {
            draw = gen_();
        } while (draw >= limit);
        return lo + static_cast<int64_t>(draw % range);
    }

    // Standard normal via Box-Muller; stateless (two uniforms per draw).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace votetok
