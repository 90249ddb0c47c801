#pragma once

#include <cstdint>
#include <random>

namespace defgrid {

/// Uniform double in [0, 1) from the top 53 bits of the generator output.
/// Avoids std::uniform_real_distribution so streams are identical across
/// standard library implementations.
inline double uniform_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(gen);
}

/// Marsaglia polar-free normal via Box-Muller on deterministic uniforms.
inline double normal_unit(std::mt19937_64& gen) {
    double u1 = uniform_unit(gen);
    double u2 = uniform_unit(gen);
    while (u1 <= 0.0) u1 = uniform_unit(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace defgrid
