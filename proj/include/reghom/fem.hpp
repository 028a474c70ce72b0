#pragma once

// Q1 assembly of T^{-1} u - div A (xi + grad u) = f on structured grids.

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "reghom/coeffs.hpp"
#include "reghom/error.hpp"
#include "reghom/grid.hpp"
#include "reghom/sparse.hpp"

namespace reghom {

/// A evaluated at every Gauss point of a grid, index 4 * cell + q.
struct CoefficientSamples {
  StructuredGrid grid;
  std::vector<Matrix2> a;
  bool symmetric = true;

  const Matrix2& at(int cell, int q) const { return a[4 * static_cast<std::size_t>(cell) + q]; }

  CoefficientSamples transposed() const {
    CoefficientSamples t = *this;
    if (!symmetric)
      for (auto& m : t.a) m = m.transpose();
    return t;
  }
};

inline CoefficientSamples sample_coefficients(const StructuredGrid& g,
                                              const CoefficientField& field) {
  CoefficientSamples s{g, {}, field.is_symmetric};
  s.a.resize(4 * static_cast<std::size_t>(g.cell_count()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      for (int q = 0; q < 4; ++q) s.a[4 * g.cell_index(i, j) + q] = field(gauss::point(g, i, j, q));
  return s;
}

struct SparseSystem {
  std::shared_ptr<const DofMap> dofs;
  CsrMatrix matrix;
  std::vector<double> rhs;
  bool symmetric = true;
  double inv_T = 0.0;
  bool pinned = false;  // periodic zero-mean constraint via one pinned dof
};

namespace detail {

// Reference-cell shape function gradients (d/ds, d/dt) at each Gauss point,
// local node order (0,0), (1,0), (0,1), (1,1).
struct Q1Tables {
  std::array<std::array<Vec2, 4>, 4> grad{};
  std::array<std::array<double, 4>, 4> value{};
  Q1Tables() {
    for (int q = 0; q < 4; ++q) {
      const double s = gauss::points[q][0], t = gauss::points[q][1];
      grad[q] = {Vec2{-(1 - t), -(1 - s)}, Vec2{1 - t, -s}, Vec2{-t, 1 - s}, Vec2{t, s}};
      value[q] = {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
    }
  }
};

inline const Q1Tables& q1_tables() {
  static const Q1Tables t;
  return t;
}

inline std::array<int, 4> cell_dofs(const DofMap& d, int i, int j) {
  return {d.dof(i, j), d.dof(i + 1, j), d.dof(i, j + 1), d.dof(i + 1, j + 1)};
}

}  // namespace detail

/// Nine-point sparsity pattern of Q1 on a structured grid, values zero.
inline CsrMatrix q1_pattern(const DofMap& d) {
  const auto& g = d.grid();
  const bool periodic = d.bc() == Boundary::periodic;
  std::vector<std::array<int, 2>> rep(d.free_count(), {-1, -1});
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const int k = d.dof(i, j);
      if (k >= 0 && rep[k][0] < 0) rep[k] = {i, j};
    }
  CsrMatrix m;
  m.rows = d.free_count();
  m.row_ptr.assign(m.rows + 1, 0);
  m.col.reserve(9 * static_cast<std::size_t>(m.rows));
  std::array<int, 9> cols{};
  for (int r = 0; r < m.rows; ++r) {
    int c = 0;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        int i = rep[r][0] + di, j = rep[r][1] + dj;
        if (periodic) {
          i = (i + g.nx) % g.nx;
          j = (j + g.ny) % g.ny;
        } else if (i < 0 || j < 0 || i > g.nx || j > g.ny) {
          continue;
        }
        const int k = d.dof(i, j);
        if (k >= 0) cols[c++] = k;
      }
    std::sort(cols.begin(), cols.begin() + c);
    const int u = static_cast<int>(std::unique(cols.begin(), cols.begin() + c) - cols.begin());
    m.col.insert(m.col.end(), cols.begin(), cols.begin() + u);
    m.row_ptr[r + 1] = static_cast<int>(m.col.size());
  }
  m.val.assign(m.col.size(), 0.0);
  return m;
}

/// Stiffness and mass matrices for one grid and coefficient sample set, with
/// load vectors for any xi. Immutable once built.
class FemOperators {
 public:
  FemOperators(std::shared_ptr<const DofMap> dofs, std::shared_ptr<const CoefficientSamples> coef)
      : dofs_(std::move(dofs)), coef_(std::move(coef)) {
    if (!(coef_->grid == dofs_->grid()))
      throw Error("FemOperators: coefficient samples belong to a different grid");
    build();
  }

  FemOperators(const StructuredGrid& g, const CoefficientField& field, Boundary bc)
      : FemOperators(std::make_shared<const DofMap>(g, bc),
                     std::make_shared<const CoefficientSamples>(sample_coefficients(g, field))) {}

  const std::shared_ptr<const DofMap>& dofs() const { return dofs_; }
  const std::shared_ptr<const CoefficientSamples>& coefficients() const { return coef_; }
  const StructuredGrid& grid() const { return dofs_->grid(); }
  const CsrMatrix& stiffness() const { return stiffness_; }
  const CsrMatrix& mass() const { return mass_; }
  bool symmetric() const { return coef_->symmetric; }

  /// K + inv_T M.
  CsrMatrix op(double inv_T) const { return stiffness_.combined(1.0, mass_, inv_T); }

  /// Entries -int grad(psi_a) . A xi.
  std::vector<double> load(const Vec2& xi) const {
    const auto& g = grid();
    const auto& tab = detail::q1_tables();
    std::vector<double> b(dofs_->free_count(), 0.0);
    const double w = 0.25 * g.h;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const auto d = detail::cell_dofs(*dofs_, i, j);
        const int c = g.cell_index(i, j);
        for (int q = 0; q < 4; ++q) {
          const Vec2 flux = coef_->at(c, q) * xi;
          for (int a = 0; a < 4; ++a)
            if (d[a] >= 0) b[d[a]] -= w * dot(tab.grad[q][a], flux);
        }
      }
    return b;
  }

  /// Entries int psi_a f, by the same Gauss rule.
  std::vector<double> source(const std::function<double(const Vec2&)>& f) const {
    const auto& g = grid();
    const auto& tab = detail::q1_tables();
    std::vector<double> b(dofs_->free_count(), 0.0);
    const double w = 0.25 * g.h * g.h;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const auto d = detail::cell_dofs(*dofs_, i, j);
        for (int q = 0; q < 4; ++q) {
          const double fq = f(gauss::point(g, i, j, q));
          for (int a = 0; a < 4; ++a)
            if (d[a] >= 0) b[d[a]] += w * tab.value[q][a] * fq;
        }
      }
    return b;
  }

  /// The linear system for (inv_T, xi). With periodic bc and inv_T = 0 the
  /// zero-mean constraint must be requested.
  SparseSystem system(double inv_T, const Vec2& xi, bool mean_constraint = true) const {
    if (!(inv_T >= 0.0) || !std::isfinite(inv_T))
      throw Error("assemble: inv_T must be finite and nonnegative");
    SparseSystem s{dofs_, op(inv_T), load(xi), symmetric(), inv_T, false};
    if (dofs_->bc() == Boundary::periodic && inv_T == 0.0) {
      if (!mean_constraint)
        throw Error("assemble: periodic problem with inv_T = 0 is singular without the mean constraint");
      pin_first(s);
    }
    return s;
  }

 private:
  static void pin_first(SparseSystem& s) {
    CsrMatrix& m = s.matrix;
    const double diag = m.at(0, 0);
    for (int r = 0; r < m.rows; ++r)
      for (int p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p)
        if (r == 0 || m.col[p] == 0) m.val[p] = (r == 0 && m.col[p] == 0) ? diag : 0.0;
    s.rhs[0] = 0.0;
    s.pinned = true;
  }

  void build() {
    const auto& g = grid();
    const auto& tab = detail::q1_tables();
    stiffness_ = q1_pattern(*dofs_);
    mass_ = stiffness_;
    const double wm = 0.25 * g.h * g.h;
    std::array<std::array<double, 4>, 4> me{};
    for (int q = 0; q < 4; ++q)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) me[a][b] += wm * tab.value[q][a] * tab.value[q][b];
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const auto d = detail::cell_dofs(*dofs_, i, j);
        const int c = g.cell_index(i, j);
        std::array<std::array<double, 4>, 4> ke{};
        for (int q = 0; q < 4; ++q) {
          const Matrix2& A = coef_->at(c, q);
          for (int b = 0; b < 4; ++b) {
            const Vec2 ag = A * tab.grad[q][b];
            for (int a = 0; a < 4; ++a) ke[a][b] += 0.25 * dot(tab.grad[q][a], ag);
          }
        }
        for (int a = 0; a < 4; ++a) {
          if (d[a] < 0) continue;
          for (int b = 0; b < 4; ++b) {
            if (d[b] < 0) continue;
            const int p = stiffness_.find(d[a], d[b]);
            stiffness_.val[p] += ke[a][b];
            mass_.val[p] += me[a][b];
          }
        }
      }
  }

  std::shared_ptr<const DofMap> dofs_;
  std::shared_ptr<const CoefficientSamples> coef_;
  CsrMatrix stiffness_;
  CsrMatrix mass_;
};

inline SparseSystem assemble(const StructuredGrid& g, const CoefficientField& field, double inv_T,
                             const Vec2& xi, Boundary bc, bool mean_constraint = true) {
  return FemOperators(g, field, bc).system(inv_T, xi, mean_constraint);
}

struct SolveOptions {
  double rel_tol = 1e-10;
  int max_iter = 0;  // 0 selects a grid-dependent default
};

inline int default_max_iter(const StructuredGrid& g) { return 400 * (g.nx + g.ny) + 2000; }

/// CG for symmetric systems, BiCGStab otherwise. `guess` seeds the iteration.
inline DofVector solve(const SparseSystem& s, const SolveOptions& opt = {},
                       SolveStats* stats = nullptr, const std::vector<double>* guess = nullptr) {
  if (!(opt.rel_tol > 0.0 && opt.rel_tol <= 1e-4)) throw Error("solve: rel_tol must lie in (0, 1e-4]");
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : default_max_iter(s.dofs->grid());
  std::vector<double> x = guess ? *guess : std::vector<double>(s.rhs.size(), 0.0);
  if (x.size() != s.rhs.size()) throw Error("solve: initial guess has the wrong length");
  if (s.pinned) x[0] = 0.0;
  const SolveStats st = s.symmetric ? conjugate_gradient(s.matrix, s.rhs, x, opt.rel_tol, max_iter)
                                    : bicgstab(s.matrix, s.rhs, x, opt.rel_tol, max_iter);
  if (stats) *stats = st;
  if (s.pinned) {
    // Every periodic dof carries the same mass, so the dof mean is the integral mean.
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double& v : x) v -= mean;
  }
  return {s.dofs, std::move(x)};
}

}  // namespace reghom
