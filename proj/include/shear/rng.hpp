#pragma once

#include <cstdint>

namespace shear {

// splitmix64: tiny, seedable, identical output on every platform.
// std::mt19937 + distributions are implementation-defined, which would break
// the byte-reproducibility contract, so all randomness goes through this.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, bound) without modulo bias.
    uint64_t next_below(uint64_t bound) {
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }

    // Uniform in [-scale, scale).
    float next_symmetric(float scale) {
        return static_cast<float>((2.0 * next_double() - 1.0) * scale);
    }

private:
    uint64_t state_;
};

} // namespace shear
