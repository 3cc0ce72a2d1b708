#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

// Deterministic random number utilities. All stochastic code in the library
// draws through Rng and derives child seeds with derive(), so that every
// result is a pure function of the root seed regardless of thread count.

namespace fsml::rng {

// splitmix64 finalizer, used only for seed derivation.
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed splitting rule: fold each tag into the parent seed with mix().
// derive(s, a, b) != derive(derive(s, a), b), so stream tags below keep
// sibling streams from colliding as long as tag tuples are unique.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t part) {
    return mix(seed ^ mix(part));
}

template <typename... Rest>
std::uint64_t derive(std::uint64_t seed, std::uint64_t part, Rest... rest) {
    return derive(derive(seed, part), rest...);
}

// Stream tags for derive(); one per independent consumer of randomness.
namespace stream {
inline constexpr std::uint64_t init = 1;        // network init
inline constexpr std::uint64_t noise = 2;       // label corruption
inline constexpr std::uint64_t task = 3;        // task sampling
inline constexpr std::uint64_t augment = 4;     // single augmentations
inline constexpr std::uint64_t pool = 5;        // augmentation pools
inline constexpr std::uint64_t manifold = 6;    // manifold sampling
inline constexpr std::uint64_t inner = 7;       // inner-loop batches
inline constexpr std::uint64_t outer = 8;       // meta-gradient batches
inline constexpr std::uint64_t eval = 9;        // meta-test tasks
inline constexpr std::uint64_t tie = 10;        // argmax tie-breaking
inline constexpr std::uint64_t mc = 11;         // Monte Carlo chunks
inline constexpr std::uint64_t cell = 12;       // sweep cells
inline constexpr std::uint64_t data = 13;       // synthetic data
inline constexpr std::uint64_t train = 14;      // meta-training epochs
inline constexpr std::uint64_t hvp_batch = 15;  // fixed batch for implicit solves
}  // namespace stream

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes exactly two uniforms per call
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // uniform index in [0, n) without modulo bias
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
        const std::uint64_t un = n;
        const std::uint64_t zone = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x = next_u64();
        while (x >= zone) x = next_u64();
        return static_cast<std::size_t>(x % un);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn uniformly from [0, n), partial Fisher-Yates order
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("Rng::sample_indices: k > n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + index(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace fsml::rng
