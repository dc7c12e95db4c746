#pragma once

#include <complex>
#include <vector>

#include "mcse/common.hpp"

namespace mcse {

using cdouble = std::complex<double>;
using CVec = std::vector<cdouble>;

// Dense complex matrix, row-major. Sized for per-bin channel algebra
// (C <= 6 in this codebase), not for large systems.
class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols) : rows_(rows), cols_(cols), m_(rows * cols) {}

  static CMat identity(int n) {
    CMat a(n, n);
    for (int i = 0; i < n; ++i) a.at(i, i) = 1.0;
    return a;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  cdouble& at(int r, int c) { return m_[r * cols_ + c]; }
  const cdouble& at(int r, int c) const { return m_[r * cols_ + c]; }

  CMat adjoint() const {
    CMat a(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) a.at(c, r) = std::conj(at(r, c));
    return a;
  }

  CMat operator*(const CMat& b) const {
    require(cols_ == b.rows_, "CMat multiply: shape mismatch");
    CMat out(rows_, b.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const cdouble aik = at(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < b.cols_; ++j) out.at(i, j) += aik * b.at(k, j);
      }
    return out;
  }

  CVec operator*(const CVec& v) const {
    require(cols_ == static_cast<int>(v.size()), "CMat*vec: shape mismatch");
    CVec out(rows_, 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out[i] += at(i, j) * v[j];
    return out;
  }

  CMat& operator+=(const CMat& b) {
    require(rows_ == b.rows_ && cols_ == b.cols_, "CMat add: shape mismatch");
    for (std::size_t i = 0; i < m_.size(); ++i) m_[i] += b.m_[i];
    return *this;
  }

  CMat& operator*=(double s) {
    for (auto& v : m_) v *= s;
    return *this;
  }

  double fro_norm() const {
    double s = 0.0;
    for (const auto& v : m_) s += std::norm(v);
    return std::sqrt(s);
  }

  // A = A^H within rel_tol (Frobenius, relative to ||A||).
  bool is_hermitian(double rel_tol = 1e-12) const {
    if (rows_ != cols_) return false;
    double diff = 0.0;
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c)
        diff += std::norm(at(r, c) - std::conj(at(c, r)));
    const double n = fro_norm();
    return std::sqrt(diff) <= rel_tol * (n > 0.0 ? n : 1.0);
  }

  bool all_finite() const {
    for (const auto& v : m_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<cdouble> m_;
};

inline cdouble dot(const CVec& a, const CVec& b) {
  // Hermitian inner product, conjugate on the first argument.
  require(a.size() == b.size(), "dot: size mismatch");
  cdouble s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline double vec_norm(const CVec& a) {
  double s = 0.0;
  for (const auto& v : a) s += std::norm(v);
  return std::sqrt(s);
}

// Rank-1 outer product v v^H.
inline CMat outer(const CVec& v) {
  CMat a(static_cast<int>(v.size()), static_cast<int>(v.size()));
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) a.at(r, c) = v[r] * std::conj(v[c]);
  return a;
}

}  // namespace mcse
