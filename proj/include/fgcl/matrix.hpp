#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace fgcl {

using Vec = std::vector<double>;

// Row-major dense matrix of doubles. All numerics in this project are plain
// loops over this; no BLAS.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool operator==(const Matrix& o) const = default;
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// y += A x, A is (m x n) row-major.
inline void matvec_add(const Matrix& a, const double* x, double* y) {
    for (std::size_t i = 0; i < a.rows; ++i) y[i] += dot(a.row(i), x, a.cols);
}

// y += A^T x, A is (m x n) row-major, x has m entries, y has n.
inline void matvec_t_add(const Matrix& a, const double* x, double* y) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += xi * r[j];
    }
}

// A += alpha * u v^T, u has a.rows entries, v has a.cols.
inline void outer_add(Matrix& a, double alpha, const double* u, const double* v) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double s = alpha * u[i];
        if (s == 0.0) continue;
        double* r = a.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) r[j] += s * v[j];
    }
}

inline double l2_norm(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
    return s > 0.0 ? std::sqrt(s) : 0.0;
}

}  // namespace fgcl
