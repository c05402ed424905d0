#pragma once

#include <cstdint>
#include <random>

namespace idcanvas {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed and a list of tags (worker id, step, scene index, ...).
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
    std::uint64_t s = mix64(base);
    ((s = mix64(s ^ static_cast<std::uint64_t>(tags))), ...);
    return s;
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform(rng) < p; }

}  // namespace idcanvas
