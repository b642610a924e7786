#pragma once

#include <cmath>

#include "ripple/matrix.hpp"
#include "ripple/rng.hpp"

namespace ripple {

/// Scaled-uniform init, bounds +/- sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(int rows, int cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = rng.uniform(-bound, bound);
    return m;
}

}  // namespace ripple
