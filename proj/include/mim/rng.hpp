#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mim::rng {

// All sampling goes through these helpers rather than <random>
// distributions: std::mt19937_64 output is fully specified by the
// standard, the distribution adaptors are not, and same-seed runs must
// be byte-identical across toolchains.

using Engine = std::mt19937_64;

inline double uniform01(Engine& g) {
    // 53-bit mantissa in [0,1)
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& g, double lo, double hi) {
    return lo + (hi - lo) * uniform01(g);
}

// [lo, hi] inclusive
inline std::int64_t uniform_int(Engine& g, std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // multiply-shift; bias < 2^-64, irrelevant here but deterministic
    const unsigned __int128 m = static_cast<unsigned __int128>(g()) * span;
    return lo + static_cast<std::int64_t>(m >> 64);
}

inline double normal(Engine& g) {
    // Box-Muller, one value per call (second discarded for simplicity)
    double u1 = uniform01(g);
    while (u1 <= 0.0) u1 = uniform01(g);
    const double u2 = uniform01(g);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline double exponential(Engine& g, double mean) {
    double u = uniform01(g);
    while (u <= 0.0) u = uniform01(g);
    return -mean * std::log(u);
}

inline double lognormal(Engine& g, double mu_log, double sigma_log) {
    return std::exp(mu_log + sigma_log * normal(g));
}

inline bool bernoulli(Engine& g, double p) {
    return uniform01(g) < p;
}

// Continuous Pareto on [xmin, inf), tail exponent alpha (pdf ~ x^-(alpha+1)).
inline double pareto(Engine& g, double xmin, double alpha) {
    double u = uniform01(g);
    while (u <= 0.0) u = uniform01(g);
    return xmin * std::pow(u, -1.0 / alpha);
}

// Weighted choice over w[0..n); weights need not be normalized.
inline std::size_t weighted_choice(Engine& g, const double* w, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += w[i];
    double r = uniform01(g) * total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (r < w[i]) return i;
        r -= w[i];
    }
    return n - 1;
}

}  // namespace mim::rng
