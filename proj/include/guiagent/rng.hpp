#pragma once

#include <cstdint>
#include <random>

namespace guiagent {

// Deterministic RNG helpers. std::*_distribution output is not pinned by the
// standard, so anything that must reproduce bit-for-bit across toolchains
// draws through these instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : engine_() % n;
    }

    // Uniform integer in [lo, hi], inclusive.
    long next_range(long lo, long hi) {
        return lo + static_cast<long>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Sample an index from unnormalized non-negative weights.
    template <typename Container>
    std::size_t next_weighted(const Container& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = next_double() * total;
        double acc = 0.0;
        std::size_t i = 0;
        for (double w : weights) {
            acc += w;
            if (r < acc) return i;
            ++i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace guiagent
