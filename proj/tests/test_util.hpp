#pragma once

#include <algorithm>
#include <cmath>

#include "ripple/matrix.hpp"
#include "ripple/rng.hpp"

namespace ripple::testutil {

inline Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = scale * rng.gaussian();
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double mx = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) mx = std::max(mx, std::abs(a(i, j) - b(i, j)));
    return mx;
}

inline double max_abs(const Matrix& a) {
    double mx = 0.0;
    for (double v : a.flat()) mx = std::max(mx, std::abs(v));
    return mx;
}

}  // namespace ripple::testutil
