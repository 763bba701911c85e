#pragma once

#include <cstdint>

namespace dvforge {

// Deterministic PRNG with explicitly specified output mapping.
//
// std::mt19937_64 is portable, but the standard <random> distributions are
// implementation-defined, so every mapping from raw bits to a usable value
// lives here. All pipelines that promise byte-identical reruns draw from
// this type only.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream for a sub-task, e.g. one document of a corpus.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed);
        std::uint64_t a = r.next_u64();
        Rng s(a ^ (stream + 0x9e3779b97f4a7c15ULL));
        s.next_u64();
        return s;
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling keeps the result unbiased.
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t v = next_u64();
            if (v >= threshold) {
                return v % n;
            }
        }
    }

    // Uniform integer in [lo, hi], inclusive.
    int next_int(int lo, int hi) {
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Standard normal via Box-Muller; consumes two uniforms per call.
    double next_normal();

private:
    std::uint64_t state_;
};

} // namespace dvforge
