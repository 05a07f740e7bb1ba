#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pinch {

// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
// is fixed by the standard) and derives bounded ints / unit doubles from raw
// engine words, because std::uniform_*_distribution sequences are
// implementation-defined and would break the reproducibility contract.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : engine_(mix(seed)) {}

    // Independent sub-stream for (seed, stream_id), e.g. one per forest tree.
    static RngStream derive(uint64_t seed, uint64_t stream_id) {
        return RngStream(mix(seed) ^ mix(stream_id * 0x9e3779b97f4a7c15ULL + 1));
    }

    uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, bound) via rejection sampling.
    uint64_t below(uint64_t bound) {
        if (bound <= 1) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // splitmix64 finalizer; spreads nearby seeds across the state space.
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

// Deterministic child seed for a (seed, id) pair.
inline uint64_t derive_seed(uint64_t seed, uint64_t id) {
    RngStream stream = RngStream::derive(seed, id);
    return stream.next_u64();
}

}  // namespace pinch
