#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "bio/core/types.hpp"

namespace bio {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for (base, a, b). Episodes and sub-streams
// (mapping, losses, delays, learner) all derive from here, so results do
// not depend on scheduling or thread count.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// Uniform on [0, 1) with 53 random bits; portable across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from a (possibly unnormalised) non-negative weight vector.
inline std::size_t sample_index(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw InternalError("sample_index: weights sum to zero");
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = i;
        acc += weights[i];
        if (u < acc) return i;
    }
    return last_positive;
}

inline bool bernoulli(double p, Rng& rng) {
    return uniform01(rng) < p;
}

inline double laplace(double location, double scale, Rng& rng) {
    // u in (-1/2, 1/2); the endpoint -1/2 maps to -inf and is skipped
    double u;
    do {
        u = uniform01(rng) - 0.5;
    } while (u == -0.5);
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return location - scale * sign * std::log1p(-2.0 * std::abs(u));
}

} // namespace bio
