#pragma once

// Dense row-major kernels used by the TinyLM forward/backward passes.
//
// The top-level functions are OpenMP-parallel over output rows; every output
// element is still produced by a single thread in a fixed summation order, so
// results do not depend on the thread count. kernels::reference holds plain
// serial versions kept for testing and benchmarking.

#include <cstddef>
#include <span>

namespace unlearn::kernels {

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c);

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c);

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c);

// y[t] += bias for each of the rows rows of width n.
void add_row_bias(std::size_t rows, std::size_t n, std::span<const double> bias, std::span<double> y);

// out[j] += sum_t x[t][j]
void accumulate_column_sums(std::size_t rows, std::size_t n, std::span<const double> x,
                            std::span<double> out);

// Row-wise layer normalisation. Writes the normalised pre-affine values into
// xhat (needed for backward) alongside y = gamma * xhat + beta.
void layernorm_forward(std::size_t rows, std::size_t n, std::span<const double> x,
                       std::span<const double> gamma, std::span<const double> beta,
                       std::span<double> xhat, std::span<double> rstd, std::span<double> y);

// Accumulates into dx, dgamma and dbeta.
void layernorm_backward(std::size_t rows, std::size_t n, std::span<const double> dy,
                        std::span<const double> xhat, std::span<const double> rstd,
                        std::span<const double> gamma, std::span<double> dx,
                        std::span<double> dgamma, std::span<double> dbeta);

// tanh-approximated GELU.
void gelu_forward(std::span<const double> x, std::span<double> y);
// dx += dy * gelu'(x)
void gelu_backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx);

// In-place numerically stable softmax over each row of width n.
void softmax_rows(std::size_t rows, std::size_t n, std::span<double> x);

// log-softmax of a single row into out.
void log_softmax(std::span<const double> logits, std::span<double> out);

namespace reference {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             std::span<const double> a, std::span<const double> b, std::span<double> c);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n,
             std::span<const double> a, std::span<const double> b, std::span<double> c);
void layernorm_forward(std::size_t rows, std::size_t n, std::span<const double> x,
                       std::span<const double> gamma, std::span<const double> beta,
                       std::span<double> xhat, std::span<double> rstd, std::span<double> y);
void softmax_rows(std::size_t rows, std::size_t n, std::span<double> x);

}  // namespace reference

}  // namespace unlearn::kernels
