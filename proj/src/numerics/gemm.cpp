#include "mcse/numerics/gemm.hpp"

#include <cstring>

namespace mcse {

namespace {

void scale_c(std::int64_t m, std::int64_t n, double beta, double* c) {
  if (beta == 1.0) return;
  if (beta == 0.0) {
    std::memset(c, 0, static_cast<std::size_t>(m * n) * sizeof(double));
    return;
  }
  for (std::int64_t i = 0; i < m * n; ++i) c[i] *= beta;
}

}  // namespace

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c) {
  scale_c(m, n, beta, c);
  // i-p-j order: C row stays hot, B rows stream.
  for (std::int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const double s = alpha * ai[p];
      if (s == 0.0) continue;
      const double* bp = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c) {
  scale_c(m, n, beta, c);
  // Both operands are traversed along contiguous rows; each C entry is a dot.
  for (std::int64_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::int64_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += alpha * s;
    }
  }
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, double alpha,
             const double* a, const double* b, double beta, double* c) {
  scale_c(m, n, beta, c);
  // p outer: rank-1 update per shared row of A(k,m) and B(k,n).
  for (std::int64_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double s = alpha * ap[i];
      if (s == 0.0) continue;
      double* ci = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

}  // namespace mcse
