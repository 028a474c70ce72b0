#pragma once

// Compressed sparse row matrices and Jacobi-preconditioned Krylov solvers.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "reghom/error.hpp"

namespace reghom {

struct CsrMatrix {
  int rows = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  /// Position of entry (r, c) in `val`, or -1 if outside the pattern.
  int find(int r, int c) const {
    const auto first = col.begin() + row_ptr[r];
    const auto last = col.begin() + row_ptr[r + 1];
    const auto it = std::lower_bound(first, last, c);
    return (it != last && *it == c) ? static_cast<int>(it - col.begin()) : -1;
  }

  double at(int r, int c) const {
    const int p = find(r, c);
    return p < 0 ? 0.0 : val[p];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int r = 0; r < rows; ++r) {
      double s = 0.0;
      for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += val[p] * x[col[p]];
      y[r] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows);
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (int r = 0; r < rows; ++r) d[r] = at(r, r);
    return d;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : val) m = std::max(m, std::abs(v));
    return m;
  }

  /// max |M - M^T| over the pattern (the pattern itself is symmetric).
  double max_asymmetry() const {
    double m = 0.0;
    for (int r = 0; r < rows; ++r)
      for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
        m = std::max(m, std::abs(val[p] - at(col[p], r)));
    return m;
  }

  /// Same pattern, values a * this + b * other.
  CsrMatrix combined(double a, const CsrMatrix& other, double b) const {
    if (other.col != col) throw Error("CsrMatrix::combined: sparsity patterns differ");
    CsrMatrix m = *this;
    for (std::size_t p = 0; p < val.size(); ++p) m.val[p] = a * val[p] + b * other.val[p];
    return m;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

namespace detail {

inline double true_residual(const CsrMatrix& A, std::span<const double> b,
                            std::span<const double> x, std::vector<double>& r) {
  A.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return norm2(r);
}

inline std::vector<double> inverse_diagonal(const CsrMatrix& A) {
  auto d = A.diagonal();
  for (double& v : d) {
    if (v == 0.0) throw Error("Jacobi preconditioner: zero diagonal entry");
    v = 1.0 / v;
  }
  return d;
}

[[noreturn]] inline void fail(const char* name, double achieved, int it) {
  std::ostringstream msg;
  msg << name << ": no convergence after " << it << " iterations (relative residual "
      << achieved << ")";
  throw SolverError(msg.str(), achieved, it);
}

}  // namespace detail

/// Preconditioned conjugate gradients for symmetric positive definite A.
/// `x` holds the initial guess on entry.
inline SolveStats conjugate_gradient(const CsrMatrix& A, std::span<const double> b,
                                     std::vector<double>& x, double rel_tol, int max_iter) {
  const std::size_t n = b.size();
  x.resize(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }
  const auto dinv = detail::inverse_diagonal(A);
  std::vector<double> r(n), z(n), p(n), q(n);
  int it = 0;
  double res = detail::true_residual(A, b, x, r) / bnorm;
  // Restart from the true residual whenever the recurrence claims convergence.
  while (res > rel_tol && it < max_iter) {
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] = dinv[i] * r[i];
    double rz = dot(r, z);
    while (it < max_iter) {
      A.multiply(p, q);
      const double alpha = rz / dot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      if (norm2(r) <= rel_tol * bnorm) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    res = detail::true_residual(A, b, x, r) / bnorm;
  }
  if (res > rel_tol) detail::fail("conjugate_gradient", res, it);
  return {it, res};
}

/// Right-preconditioned BiCGStab for general nonsingular A.
inline SolveStats bicgstab(const CsrMatrix& A, std::span<const double> b, std::vector<double>& x,
                           double rel_tol, int max_iter) {
  const std::size_t n = b.size();
  x.resize(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {0, 0.0};
  }
  const auto dinv = detail::inverse_diagonal(A);
  std::vector<double> r(n), r0(n), p(n), v(n), s(n), t(n), ph(n), sh(n);
  int it = 0;
  double res = detail::true_residual(A, b, x, r) / bnorm;
  while (res > rel_tol && it < max_iter) {
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    bool breakdown = false;
    while (it < max_iter) {
      const double rho_new = dot(r0, r);
      if (rho_new == 0.0 || omega == 0.0) {
        breakdown = true;
        break;
      }
      const double beta = (rho_new / rho) * (alpha / omega);
      rho = rho_new;
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = r[i] + beta * (p[i] - omega * v[i]);
        ph[i] = dinv[i] * p[i];
      }
      A.multiply(ph, v);
      alpha = rho / dot(r0, v);
      for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
      ++it;
      if (norm2(s) <= rel_tol * bnorm) {
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * ph[i];
        break;
      }
      for (std::size_t i = 0; i < n; ++i) sh[i] = dinv[i] * s[i];
      A.multiply(sh, t);
      const double tt = dot(t, t);
      omega = tt == 0.0 ? 0.0 : dot(t, s) / tt;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * ph[i] + omega * sh[i];
        r[i] = s[i] - omega * t[i];
      }
      if (norm2(r) <= rel_tol * bnorm) break;
    }
    const double prev = res;
    res = detail::true_residual(A, b, x, r) / bnorm;
    if (breakdown && res >= prev) break;
  }
  if (res > rel_tol) detail::fail("bicgstab", res, it);
  return {it, res};
}

}  // namespace reghom
