#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "reghom/error.hpp"
#include "reghom/grid.hpp"
#include "reghom/sparse.hpp"

using namespace reghom;

namespace {

// Tridiagonal matrix with constant stencil (lo, d, up).
CsrMatrix tridiag(int n, double lo, double d, double up) {
  CsrMatrix A;
  A.rows = n;
  for (int r = 0; r < n; ++r) {
    if (r > 0) A.col.push_back(r - 1), A.val.push_back(lo);
    A.col.push_back(r), A.val.push_back(d);
    if (r + 1 < n) A.col.push_back(r + 1), A.val.push_back(up);
    A.row_ptr.push_back(static_cast<int>(A.col.size()));
  }
  return A;
}

// Thomas algorithm oracle.
std::vector<double> thomas(int n, double lo, double d, double up, std::vector<double> b) {
  std::vector<double> c(n), x(n);
  double denom = d;
  c[0] = up / denom;
  b[0] /= denom;
  for (int i = 1; i < n; ++i) {
    denom = d - lo * c[i - 1];
    c[i] = up / denom;
    b[i] = (b[i] - lo * b[i - 1]) / denom;
  }
  x[n - 1] = b[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = b[i] - c[i] * x[i + 1];
  return x;
}

}  // namespace

TEST(Grid, BoxGeometry) {
  const auto g = StructuredGrid::box(5.0, 80);
  EXPECT_DOUBLE_EQ(g.h, 0.125);
  EXPECT_DOUBLE_EQ(g.half_width(), 5.0);
  EXPECT_EQ(g.node_count(), 81 * 81);
  EXPECT_DOUBLE_EQ(g.center().x, 0.0);
  EXPECT_THROW(StructuredGrid::box(5.0, 1), Error);
  EXPECT_THROW(StructuredGrid::box(0.0, 8), Error);
}

TEST(Grid, DofMapsCountFreeNodes) {
  const auto g = StructuredGrid::rectangle(0.0, 0.0, 0.25, 4, 4);
  const DofMap d(g, Boundary::dirichlet0), p(g, Boundary::periodic);
  EXPECT_EQ(d.free_count(), 9);
  EXPECT_EQ(p.free_count(), 16);
  EXPECT_EQ(d.dof(0, 2), -1);
  EXPECT_EQ(p.dof(4, 3), p.dof(0, 3));
  EXPECT_EQ(p.dof(4, 4), p.dof(0, 0));
  std::vector<double> free(9);
  for (int i = 0; i < 9; ++i) free[i] = i + 1.0;
  EXPECT_EQ(d.from_nodal(d.to_nodal(free)), free);
}

TEST(Grid, Q1ReproducesBilinearFunctions) {
  const auto g = StructuredGrid::rectangle(-1.0, 0.5, 0.2, 10, 7);
  auto u = [](const Vec2& x) { return 1.0 + 2.0 * x.x - 3.0 * x.y + 0.5 * x.x * x.y; };
  std::vector<double> nodal(g.node_count());
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) nodal[g.node_index(i, j)] = u(g.node(i, j));
  const auto grads = gradient_field(g, nodal);
  const Q1Interpolant interp(g, nodal, false);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      for (int q = 0; q < 4; ++q) {
        const Vec2 x = gauss::point(g, i, j, q);
        const Vec2 e{2.0 + 0.5 * x.y, -3.0 + 0.5 * x.x};
        EXPECT_NEAR(grads[4 * g.cell_index(i, j) + q].x, e.x, 1e-12);
        EXPECT_NEAR(grads[4 * g.cell_index(i, j) + q].y, e.y, 1e-12);
        EXPECT_NEAR(interp.value(x), u(x), 1e-12);
      }
  EXPECT_THROW(interp.value({5.0, 0.0}), Error);
}

TEST(Grid, WrappedInterpolantIsPeriodic) {
  const auto g = StructuredGrid::rectangle(0.0, 0.0, 0.125, 8, 8);
  std::vector<double> nodal(g.node_count());
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      const Vec2 x = g.node(i, j);
      nodal[g.node_index(i, j)] = std::sin(2.0 * M_PI * x.x) * std::cos(2.0 * M_PI * x.y);
    }
  const Q1Interpolant w(g, nodal, true);
  for (int k = 0; k < 50; ++k) {
    const Vec2 x{0.0137 * k, 0.0291 * k};
    EXPECT_NEAR(w.value(x), w.value(x + Vec2{3.0, -2.0}), 1e-12);
  }
}

TEST(Sparse, MultiplyMatchesDense) {
  const auto A = tridiag(5, -1.0, 3.0, -2.0);
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto y = A * std::span<const double>(x);
  for (int r = 0; r < 5; ++r) {
    double e = 3.0 * x[r];
    if (r > 0) e -= x[r - 1];
    if (r < 4) e -= 2.0 * x[r + 1];
    EXPECT_DOUBLE_EQ(y[r], e);
  }
  EXPECT_DOUBLE_EQ(A.at(1, 2), -2.0);
  EXPECT_DOUBLE_EQ(A.at(0, 4), 0.0);
  EXPECT_DOUBLE_EQ(A.max_asymmetry(), 1.0);
}

TEST(Sparse, ConjugateGradientSolvesSpdSystem) {
  const int n = 200;
  const auto A = tridiag(n, -1.0, 2.05, -1.0);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> b(n);
  for (auto& v : b) v = u(rng);
  std::vector<double> x(n, 0.0);
  const auto st = conjugate_gradient(A, b, x, 1e-12, 5000);
  EXPECT_LE(st.relative_residual, 1e-12);
  const auto e = thomas(n, -1.0, 2.05, -1.0, b);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], e[i], 1e-9);
}

TEST(Sparse, BicgstabSolvesNonsymmetricSystem) {
  const int n = 150;
  const auto A = tridiag(n, -1.4, 2.5, -0.6);
  std::vector<double> b(n);
  for (int i = 0; i < n; ++i) b[i] = std::cos(0.1 * i);
  std::vector<double> x(n, 0.0);
  const auto st = bicgstab(A, b, x, 1e-12, 5000);
  EXPECT_LE(st.relative_residual, 1e-12);
  const auto e = thomas(n, -1.4, 2.5, -0.6, b);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], e[i], 1e-9);
}

TEST(Sparse, ZeroRightHandSideAndIterationCap) {
  const auto A = tridiag(50, -1.0, 2.0, -1.0);
  std::vector<double> b(50, 0.0), x(50, 1.0);
  EXPECT_EQ(conjugate_gradient(A, b, x, 1e-10, 100).iterations, 0);
  for (double v : x) EXPECT_EQ(v, 0.0);
  std::fill(b.begin(), b.end(), 1.0);
  EXPECT_THROW(conjugate_gradient(A, b, x, 1e-12, 3), SolverError);
}
