#pragma once

// Uniform tensor-product grids, degree-of-freedom maps and Q1 gradient sampling.

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <sstream>
#include <vector>

#include "reghom/coeffs.hpp"
#include "reghom/error.hpp"
#include "reghom/matrix2.hpp"

namespace reghom {

/// nx x ny square cells of side h, lower-left corner (x0, y0). Node (i, j)
/// sits at (x0 + i h, y0 + j h).
struct StructuredGrid {
  double x0 = -1.0;
  double y0 = -1.0;
  double h = 1.0;
  int nx = 2;
  int ny = 2;

  /// Q_R = (-R, R)^2 split into n x n cells.
  static StructuredGrid box(double R, int n) {
    if (n < 2) throw Error("StructuredGrid: need at least 2 cells per dimension");
    if (!(R > 0.0) || !std::isfinite(R)) throw Error("StructuredGrid: half width must be positive");
    return {-R, -R, 2.0 * R / n, n, n};
  }

  static StructuredGrid rectangle(double x0, double y0, double h, int nx, int ny) {
    if (nx < 2 || ny < 2) throw Error("StructuredGrid: need at least 2 cells per dimension");
    if (!(h > 0.0)) throw Error("StructuredGrid: mesh size must be positive");
    return {x0, y0, h, nx, ny};
  }

  double half_width() const { return 0.5 * nx * h; }
  int cells_per_dim() const { return nx; }
  int node_count() const { return (nx + 1) * (ny + 1); }
  int cell_count() const { return nx * ny; }
  int node_index(int i, int j) const { return j * (nx + 1) + i; }
  int cell_index(int i, int j) const { return j * nx + i; }
  Vec2 node(int i, int j) const { return {x0 + i * h, y0 + j * h}; }
  Vec2 cell_center(int i, int j) const { return {x0 + (i + 0.5) * h, y0 + (j + 0.5) * h}; }
  Vec2 center() const { return {x0 + 0.5 * nx * h, y0 + 0.5 * ny * h}; }
  Box bounds() const { return {x0, y0, x0 + nx * h, y0 + ny * h}; }

  bool operator==(const StructuredGrid&) const = default;
};

enum class Boundary { dirichlet0, periodic };

inline const char* to_string(Boundary bc) {
  return bc == Boundary::dirichlet0 ? "dirichlet0" : "periodic";
}

/// 2x2 Gauss rule on the reference cell [0,1]^2, ordered (s,t) = (g0,g0),
/// (g1,g0), (g0,g1), (g1,g1). Each weight is 1/4 of the cell area.
namespace gauss {
inline constexpr double g0 = 0.5 - 0.5 / 1.7320508075688772;
inline constexpr double g1 = 0.5 + 0.5 / 1.7320508075688772;
inline constexpr std::array<std::array<double, 2>, 4> points{
    {{g0, g0}, {g1, g0}, {g0, g1}, {g1, g1}}};

inline Vec2 point(const StructuredGrid& g, int i, int j, int q) {
  return {g.x0 + (i + points[q][0]) * g.h, g.y0 + (j + points[q][1]) * g.h};
}
}  // namespace gauss

/// Node-to-unknown numbering. Dirichlet nodes map to -1; periodic grids
/// identify the last row/column of nodes with the first.
class DofMap {
 public:
  DofMap(const StructuredGrid& grid, Boundary bc) : grid_(grid), bc_(bc) {
    node_dof_.assign(grid.node_count(), -1);
    int next = 0;
    if (bc == Boundary::dirichlet0) {
      for (int j = 1; j < grid.ny; ++j)
        for (int i = 1; i < grid.nx; ++i) node_dof_[grid.node_index(i, j)] = next++;
    } else {
      for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) node_dof_[grid.node_index(i, j)] = next++;
      for (int j = 0; j <= grid.ny; ++j)
        for (int i = 0; i <= grid.nx; ++i)
          node_dof_[grid.node_index(i, j)] =
              node_dof_[grid.node_index(i % grid.nx, j % grid.ny)];
    }
    free_count_ = next;
  }

  const StructuredGrid& grid() const { return grid_; }
  Boundary bc() const { return bc_; }
  int free_count() const { return free_count_; }
  int dof(int node) const { return node_dof_[node]; }
  int dof(int i, int j) const { return node_dof_[grid_.node_index(i, j)]; }

  /// Values at every node (zero on Dirichlet nodes).
  std::vector<double> to_nodal(std::span<const double> free) const {
    if (static_cast<int>(free.size()) != free_count_)
      throw Error("DofMap::to_nodal: vector length does not match the free-dof count");
    std::vector<double> out(node_dof_.size(), 0.0);
    for (std::size_t a = 0; a < node_dof_.size(); ++a)
      if (node_dof_[a] >= 0) out[a] = free[node_dof_[a]];
    return out;
  }

  /// Restriction of nodal values to the free dofs.
  std::vector<double> from_nodal(std::span<const double> nodal) const {
    std::vector<double> out(free_count_, 0.0);
    for (std::size_t a = 0; a < node_dof_.size(); ++a)
      if (node_dof_[a] >= 0) out[node_dof_[a]] = nodal[a];
    return out;
  }

 private:
  StructuredGrid grid_;
  Boundary bc_;
  std::vector<int> node_dof_;
  int free_count_ = 0;
};

/// Free-dof values plus the numbering they refer to.
struct DofVector {
  std::shared_ptr<const DofMap> dofs;
  std::vector<double> values;

  const StructuredGrid& grid() const { return dofs->grid(); }
  std::vector<double> nodal() const { return dofs->to_nodal(values); }
};

/// Gradient of the bilinear interpolant of the four corner values at local
/// coordinates (s, t) of a cell of side h.
inline Vec2 q1_gradient(double u00, double u10, double u01, double u11, double s, double t,
                        double h) {
  return {((1.0 - t) * (u10 - u00) + t * (u11 - u01)) / h,
          ((1.0 - s) * (u01 - u00) + s * (u11 - u10)) / h};
}

inline double q1_value(double u00, double u10, double u01, double u11, double s, double t) {
  return (1.0 - s) * (1.0 - t) * u00 + s * (1.0 - t) * u10 + (1.0 - s) * t * u01 + s * t * u11;
}

/// Gradients at the Gauss points of every cell, index 4 * cell_index + q.
inline std::vector<Vec2> gradient_field(const StructuredGrid& g, std::span<const double> nodal) {
  if (static_cast<int>(nodal.size()) != g.node_count())
    throw Error("gradient_field: nodal vector length does not match the grid");
  std::vector<Vec2> out(4 * static_cast<std::size_t>(g.cell_count()));
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double u00 = nodal[g.node_index(i, j)];
      const double u10 = nodal[g.node_index(i + 1, j)];
      const double u01 = nodal[g.node_index(i, j + 1)];
      const double u11 = nodal[g.node_index(i + 1, j + 1)];
      const std::size_t base = 4 * static_cast<std::size_t>(g.cell_index(i, j));
      for (int q = 0; q < 4; ++q)
        out[base + q] =
            q1_gradient(u00, u10, u01, u11, gauss::points[q][0], gauss::points[q][1], g.h);
    }
  }
  return out;
}

inline std::vector<Vec2> gradient_field(const DofVector& u) {
  return gradient_field(u.grid(), u.nodal());
}

/// Point evaluation of a nodal Q1 field and its gradient. With `wrap` the
/// grid is treated as one period of a periodic function.
class Q1Interpolant {
 public:
  Q1Interpolant(StructuredGrid grid, std::vector<double> nodal, bool wrap)
      : grid_(grid), nodal_(std::move(nodal)), wrap_(wrap) {
    if (static_cast<int>(nodal_.size()) != grid_.node_count())
      throw Error("Q1Interpolant: nodal vector length does not match the grid");
  }

  const StructuredGrid& grid() const { return grid_; }

  Vec2 gradient(const Vec2& x) const {
    const Loc l = locate(x);
    return q1_gradient(at(l.i, l.j), at(l.i + 1, l.j), at(l.i, l.j + 1), at(l.i + 1, l.j + 1),
                       l.s, l.t, grid_.h);
  }

  double value(const Vec2& x) const {
    const Loc l = locate(x);
    return q1_value(at(l.i, l.j), at(l.i + 1, l.j), at(l.i, l.j + 1), at(l.i + 1, l.j + 1), l.s,
                    l.t);
  }

 private:
  struct Loc {
    int i, j;
    double s, t;
  };

  double at(int i, int j) const { return nodal_[grid_.node_index(i, j)]; }

  static void split(double u, int n, bool wrap, int& cell, double& frac) {
    if (wrap) u -= n * std::floor(u / n);
    double c = std::floor(u);
    if (c < 0.0) c = 0.0;
    if (c > n - 1) c = n - 1;
    cell = static_cast<int>(c);
    frac = u - c;
  }

  Loc locate(const Vec2& x) const {
    const double u = (x.x - grid_.x0) / grid_.h;
    const double v = (x.y - grid_.y0) / grid_.h;
    if (!wrap_) {
      const double tol = 1e-9;
      if (u < -tol || v < -tol || u > grid_.nx + tol || v > grid_.ny + tol) {
        std::ostringstream msg;
        msg << "Q1Interpolant: point (" << x.x << ", " << x.y << ") lies outside the grid";
        throw Error(msg.str());
      }
    }
    Loc l{};
    split(u, grid_.nx, wrap_, l.i, l.s);
    split(v, grid_.ny, wrap_, l.j, l.t);
    return l;
  }

  StructuredGrid grid_;
  std::vector<double> nodal_;
  bool wrap_;
};

}  // namespace reghom
