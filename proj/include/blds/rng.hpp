#pragma once

#include <cstdint>
#include <random>

#include "types.hpp"

namespace blds {

/// Every stochastic routine draws from this engine, seeded with an explicit
/// 64-bit value. Child streams come from derive_seed, so work split across
/// threads reproduces exactly.
using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named sub-streams. Values are part of the on-disk reproducibility
/// contract; do not renumber.
enum class Stream : std::uint64_t {
    System = 1,
    Inputs = 2,
    Noise = 3,
    Directions = 4,
    Samples = 5,
    Products = 6,
    Perturbation = 7,
};

template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t base, Parts... parts) noexcept {
    std::uint64_t h = splitmix64(base);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

/// rows x cols matrix of i.i.d. N(0, stddev^2) entries, filled column-major.
inline Matrix gaussian_matrix(Index rows, Index cols, double stddev, Engine& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = stddev * normal(rng);
    return M;
}

}  // namespace blds
