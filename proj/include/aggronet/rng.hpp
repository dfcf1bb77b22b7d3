#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace aggronet {

// Deterministic random stream. Only the raw mt19937_64 output sequence is
// standardized by the C++ spec, so every distribution is mapped by hand here
// rather than through <random> distribution objects, which differ across
// standard libraries. Identical seeds give identical streams on any platform.
// splitmix64 finalizer. Used to derive independent stream seeds from a base
// seed and small indices; plain XOR of small integers collides structurally
// (a^b == b^a), this does not.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller. Two uniform draws per sample, the
    // second transform is discarded to keep the draw count fixed.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates. Deterministic given the seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace aggronet
