#pragma once

#include <cstddef>

// Dense linear-algebra kernels behind the autodiff matrix ops.
//
// Every kernel has a plain serial reference and an OpenMP version. Both
// accumulate each output element in the same order, so their results are
// bitwise identical; the dispatching entry points pick the OpenMP version for
// large operands when not already inside a parallel region.

namespace sta::kernels {

namespace serial {
double dot(const double* a, const double* b, std::size_t n);
// y = W x, W is rows x cols.
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
// out += W^T g.
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out);
// G += g x^T.
void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out);
// C = A B with A m x k and B k x n.
void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c);
}  // namespace serial

namespace omp {
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out);
void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out);
void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c);
}  // namespace omp

/// Operand size (rows * cols) from which the dispatchers go parallel.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* g, double* out);
void ger_acc(const double* g, std::size_t rows, const double* x, std::size_t cols, double* out);
void gemm(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c);

}  // namespace sta::kernels
