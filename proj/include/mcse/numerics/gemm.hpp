#pragma once

#include <cstdint>

namespace mcse {

// Row-major contiguous double GEMM, C = alpha*op(A)*op(B) + beta*C.
// Shapes after op: A is m-by-k, B is k-by-n, C is m-by-n. The three cases the
// training loop needs are spelled out; all are written as streaming axpy/dot
// loops that the compiler vectorizes.

// A (m,k) row-major, B (k,n) row-major.
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c);

// A (m,k) row-major, B stored as (n,k) row-major, used transposed.
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c);

// A stored as (k,m) row-major, used transposed; B (k,n) row-major.
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c);

}  // namespace mcse
