#include "sta/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>

namespace sta::kernels {

namespace serial {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a[j] * b[j];
    return s;
}

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot(w + i * cols, x, cols);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        const double* row = w + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * gi;
    }
}

void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        double* row = out + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
    }
}

void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
    }
}

}  // namespace serial

namespace omp {

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
    const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) y[i] = serial::dot(w + i * cols, x, cols);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out) {
    // Column blocks; within a block rows are walked in order, as in the serial kernel.
    constexpr std::size_t kBlock = 64;
    const auto blocks = static_cast<std::int64_t>((cols + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::size_t j0 = static_cast<std::size_t>(b) * kBlock;
        const std::size_t j1 = std::min(cols, j0 + kBlock);
        for (std::size_t i = 0; i < rows; ++i) {
            const double gi = g[i];
            const double* row = w + i * cols;
            for (std::size_t j = j0; j < j1; ++j) out[j] += row[j] * gi;
        }
    }
}

void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out) {
    const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double gi = g[i];
        double* row = out + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += gi * x[j];
    }
}

void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c) {
    const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
    }
}

}  // namespace omp

namespace {
bool go_parallel(std::size_t work) { return work >= kParallelThreshold && !omp_in_parallel(); }
}  // namespace

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
    if (go_parallel(rows * cols))
        omp::gemv(w, rows, cols, x, y);
    else
        serial::gemv(w, rows, cols, x, y);
}

void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out) {
    if (go_parallel(rows * cols))
        omp::gemv_t_acc(w, rows, cols, g, out);
    else
        serial::gemv_t_acc(w, rows, cols, g, out);
}

void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out) {
    if (go_parallel(rows * cols))
        omp::ger_acc(g, rows, x, cols, out);
    else
        serial::ger_acc(g, rows, x, cols, out);
}

void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c) {
    if (go_parallel(m * k * n))
        omp::gemm(a, m, k, b, n, c);
    else
        serial::gemm(a, m, k, b, n, c);
}

}  // namespace sta::kernels
