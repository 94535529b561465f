#pragma once

#include <cstdint>
#include <random>

#include "boltzgrad/vec3.hpp"

namespace boltzgrad {

/// splitmix64 step, used to mix seeds and stream identifiers.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derive an independent engine from a base seed and up to three stream ids.
/// Streams with distinct ids are independent; the derivation is pure, so
/// per-cell / per-member streams do not depend on execution order.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
    std::uint64_t s = mix64(seed);
    s = mix64(s ^ mix64(a + 0x100));
    s = mix64(s ^ mix64(b + 0x200));
    s = mix64(s ^ mix64(c + 0x300));
    return std::mt19937_64(s);
}

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform point on the unit sphere S^2.
inline Vec3 sample_unit_sphere(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double c = 2.0 * u(rng) - 1.0;          // cos(theta)
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double phi = 2.0 * 3.14159265358979323846 * u(rng);
    return {s * std::cos(phi), s * std::sin(phi), c};
}

/// Standard normal 3-vector scaled to inverse temperature beta (variance 1/beta per axis).
inline Vec3 sample_maxwellian(std::mt19937_64& rng, double beta, const Vec3& drift = {}) {
    std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(beta));
    return {drift.x + g(rng), drift.y + g(rng), drift.z + g(rng)};
}

}  // namespace boltzgrad
