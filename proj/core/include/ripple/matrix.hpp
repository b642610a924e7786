#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ripple {

/// Row-major dense matrix of doubles. All linear algebra in this project runs
/// through plain loops with a fixed (ascending-index) accumulation order so
/// that independent implementations can be compared bit-for-bit.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<double> row(int i) { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int i) const { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }

    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

using Vec = std::vector<double>;

/// C = A * B, accumulating over k in ascending order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto bk = b.row(k);
            for (int j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// C = A * B^T.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_bt: inner dimensions differ");
    Matrix c(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (int j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

/// C = A^T * B.
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_at: inner dimensions differ");
    Matrix c(a.cols(), b.cols());
    for (int k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (int i = 0; i < a.cols(); ++i) {
            auto ci = c.row(i);
            const double aki = ak[i];
            for (int j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

}  // namespace ripple
