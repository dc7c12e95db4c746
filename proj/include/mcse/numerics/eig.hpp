#pragma once

#include "mcse/numerics/cmat.hpp"

namespace mcse {

struct HermEig {
  std::vector<double> values;  // ascending
  CMat vectors;                // columns, unitary
};

// Cyclic Jacobi for Hermitian matrices. Chosen over tridiagonalization for
// robustness at the small sizes used here (channel covariance matrices).
// Throws on non-Hermitian input or if sweeps fail to converge.
HermEig herm_eig(const CMat& a, double herm_tol = 1e-12);

// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
// Throws naming the failed pivot when the matrix is not positive definite.
CMat cholesky(const CMat& a);

// Solves A x = b for Hermitian positive-definite A via Cholesky. Never forms
// an explicit inverse.
CVec solve_hpd(const CMat& a, const CVec& b);

// Principal generalized eigenvector: w maximizing (w^H A w)/(w^H B w),
// computed by whitening with B = L L^H and solving the standard problem on
// L^-1 A L^-H. Unit norm, phase fixed so the first nonzero entry is
// real-positive. When rel_gap is given it receives the spread between the
// top two generalized eigenvalues relative to max(1, |lambda_max|); zero
// means the principal direction is not unique.
CVec gevd_principal(const CMat& a, const CMat& b, double* rel_gap = nullptr);

// One-shot diagonal loading used when a noise covariance solve fails:
// A + (1e-6 * trace(A) / C) * I.
CMat diag_loaded(const CMat& a);

}  // namespace mcse
