#include "mcse/numerics/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mcse {

namespace {

double off_diag_norm(const CMat& a) {
  double s = 0.0;
  for (int p = 0; p < a.rows(); ++p)
    for (int q = p + 1; q < a.cols(); ++q) s += std::norm(a.at(p, q));
  return std::sqrt(2.0 * s);
}

}  // namespace

HermEig herm_eig(const CMat& a_in, double herm_tol) {
  const int n = a_in.rows();
  require(n > 0 && a_in.cols() == n, "herm_eig: matrix must be square");
  require(a_in.all_finite(), "herm_eig: non-finite entries");
  require(a_in.is_hermitian(herm_tol), "herm_eig: input is not Hermitian");

  CMat a = a_in;
  // Force exact symmetry so rotations see a clean subproblem.
  for (int p = 0; p < n; ++p) {
    a.at(p, p) = cdouble(a.at(p, p).real(), 0.0);
    for (int q = p + 1; q < n; ++q) {
      cdouble m = 0.5 * (a.at(p, q) + std::conj(a.at(q, p)));
      a.at(p, q) = m;
      a.at(q, p) = std::conj(m);
    }
  }

  CMat v = CMat::identity(n);
  const double scale = std::max(a.fro_norm(), 1e-300);
  const double tol = 1e-14 * scale;
  const int max_sweeps = 100;

  int sweep = 0;
  while (off_diag_norm(a) > tol) {
    require(++sweep <= max_sweeps, "herm_eig: Jacobi failed to converge");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cdouble apq = a.at(p, q);
        const double r = std::abs(apq);
        if (r <= 1e-18 * scale) continue;
        // Phase factor turning the 2x2 subproblem real, then a classic
        // symmetric Schur rotation.
        const cdouble phase = apq / r;  // e^{i phi}
        const double app = a.at(p, p).real();
        const double aqq = a.at(q, q).real();
        const double tau = (aqq - app) / (2.0 * r);
        const double t = (tau >= 0.0)
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // G(p,p)=c, G(p,q)=s, G(q,p)=-s*conj(phase), G(q,q)=c*conj(phase).
        const cdouble gqp = -s * std::conj(phase);
        const cdouble gqq = c * std::conj(phase);

        // A <- G^H A G: columns then rows touching p and q.
        for (int i = 0; i < n; ++i) {
          const cdouble aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip + gqp * aiq;
          a.at(i, q) = s * aip + gqq * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const cdouble apj = a.at(p, j), aqj = a.at(q, j);
          a.at(p, j) = c * apj + std::conj(gqp) * aqj;
          a.at(q, j) = s * apj + std::conj(gqq) * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const cdouble vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip + gqp * viq;
          v.at(i, q) = s * vip + gqq * viq;
        }
        a.at(p, q) = 0.0;
        a.at(q, p) = 0.0;
        a.at(p, p) = cdouble(a.at(p, p).real(), 0.0);
        a.at(q, q) = cdouble(a.at(q, q).real(), 0.0);
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a.at(i, i).real() < a.at(j, j).real(); });

  HermEig out;
  out.values.resize(n);
  out.vectors = CMat(n, n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = a.at(order[j], order[j]).real();
    for (int i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
  }
  return out;
}

CMat cholesky(const CMat& a) {
  const int n = a.rows();
  require(n > 0 && a.cols() == n, "cholesky: matrix must be square");
  CMat l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a.at(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(l.at(j, k));
    if (!(d > 0.0) || !std::isfinite(d))
      fail("cholesky: matrix not positive definite at pivot " +
           std::to_string(j));
    const double ljj = std::sqrt(d);
    l.at(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cdouble s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= l.at(i, k) * std::conj(l.at(j, k));
      l.at(i, j) = s / ljj;
    }
  }
  return l;
}

namespace {

// L y = b (forward) and L^H x = y (backward) for lower-triangular L.
CVec solve_lower(const CMat& l, const CVec& b) {
  const int n = l.rows();
  CVec y(n);
  for (int i = 0; i < n; ++i) {
    cdouble s = b[i];
    for (int k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
    y[i] = s / l.at(i, i);
  }
  return y;
}

CVec solve_lower_adjoint(const CMat& l, const CVec& y) {
  const int n = l.rows();
  CVec x(n);
  for (int i = n - 1; i >= 0; --i) {
    cdouble s = y[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(l.at(k, i)) * x[k];
    x[i] = s / std::conj(l.at(i, i));
  }
  return x;
}

}  // namespace

CVec solve_hpd(const CMat& a, const CVec& b) {
  require(a.rows() == static_cast<int>(b.size()), "solve_hpd: shape mismatch");
  const CMat l = cholesky(a);
  return solve_lower_adjoint(l, solve_lower(l, b));
}

CVec gevd_principal(const CMat& a, const CMat& b, double* rel_gap) {
  const int n = a.rows();
  require(a.cols() == n && b.rows() == n && b.cols() == n,
          "gevd_principal: shape mismatch");
  const CMat l = cholesky(b);

  // M = L^-1 A L^-H, assembled column by column.
  CMat x(n, n);  // X = L^-1 A
  for (int j = 0; j < n; ++j) {
    CVec col(n);
    for (int i = 0; i < n; ++i) col[i] = a.at(i, j);
    CVec sol = solve_lower(l, col);
    for (int i = 0; i < n; ++i) x.at(i, j) = sol[i];
  }
  CMat m(n, n);  // M = (L^-1 X^H)^H
  for (int j = 0; j < n; ++j) {
    CVec col(n);
    for (int i = 0; i < n; ++i) col[i] = std::conj(x.at(j, i));
    CVec sol = solve_lower(l, col);
    for (int i = 0; i < n; ++i) m.at(j, i) = std::conj(sol[i]);
  }
  // Whitening leaves numeric asymmetry behind; pin it down before Jacobi.
  for (int p = 0; p < n; ++p) {
    m.at(p, p) = cdouble(m.at(p, p).real(), 0.0);
    for (int q = p + 1; q < n; ++q) {
      cdouble avg = 0.5 * (m.at(p, q) + std::conj(m.at(q, p)));
      m.at(p, q) = avg;
      m.at(q, p) = std::conj(avg);
    }
  }

  const HermEig eig = herm_eig(m, 1e-9);
  if (rel_gap) {
    *rel_gap = n > 1 ? (eig.values[n - 1] - eig.values[n - 2]) /
                           std::max(1.0, std::abs(eig.values[n - 1]))
                     : 1.0;
  }
  CVec u(n);
  for (int i = 0; i < n; ++i) u[i] = eig.vectors.at(i, n - 1);

  CVec w = solve_lower_adjoint(l, u);
  const double nrm = vec_norm(w);
  require(nrm > 0.0, "gevd_principal: zero eigenvector");
  for (auto& v : w) v /= nrm;
  for (int i = 0; i < n; ++i) {
    if (std::abs(w[i]) > 1e-12) {
      const cdouble rot = std::conj(w[i]) / std::abs(w[i]);
      for (auto& v : w) v *= rot;
      break;
    }
  }
  return w;
}

CMat diag_loaded(const CMat& a) {
  CMat out = a;
  double tr = 0.0;
  for (int i = 0; i < a.rows(); ++i) tr += a.at(i, i).real();
  const double load = 1e-6 * tr / a.rows();
  for (int i = 0; i < a.rows(); ++i) out.at(i, i) += load;
  return out;
}

}  // namespace mcse
