#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "skew_field.hpp"

#include "reghom/coeffs.hpp"
#include "reghom/fem.hpp"

using namespace reghom;

namespace {

double sin_sin(const Vec2& x) { return std::sin(std::numbers::pi * x.x) * std::sin(std::numbers::pi * x.y); }

// Max nodal error of the Q1 solution of -lap u = 2 pi^2 sin sin on the unit square.
double manufactured_error(int n) {
  const auto g = StructuredGrid::rectangle(0.0, 0.0, 1.0 / n, n, n);
  const FemOperators ops(g, fields::constant(1.0), Boundary::dirichlet0);
  SparseSystem s = ops.system(0.0, Vec2{0.0, 0.0});
  s.rhs = ops.source([](const Vec2& x) { return 2.0 * std::numbers::pi * std::numbers::pi * sin_sin(x); });
  const auto u = solve(s, SolveOptions{1e-12}).nodal();
  double err = 0.0;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) err = std::max(err, std::abs(u[g.node_index(i, j)] - sin_sin(g.node(i, j))));
  return err;
}

}  // namespace

TEST(Fem, StiffnessIsSymmetricPositiveSemidefinite) {
  const auto g = StructuredGrid::box(2.0, 32);
  const FemOperators ops(g, fields::mat2(), Boundary::dirichlet0);
  const auto& K = ops.stiffness();
  EXPECT_LE(K.max_asymmetry(), 1e-13 * K.max_abs());
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> x(K.rows);
    for (auto& v : x) v = u(rng);
    EXPECT_GT(dot(x, K * std::span<const double>(x)), 0.0);
  }
}

TEST(Fem, NonsymmetricFieldGivesNonsymmetricStiffness) {
  const auto g = StructuredGrid::box(1.0, 16);
  const FemOperators ops(g, test_fields::varying_skew(), Boundary::dirichlet0);
  EXPECT_FALSE(ops.symmetric());
  EXPECT_GT(ops.stiffness().max_asymmetry(), 1e-3);
}

TEST(Fem, ConstantSkewPartCancelsInStiffness) {
  const auto g = StructuredGrid::box(1.0, 16);
  const FemOperators ops(g, fields::mat4(), Boundary::dirichlet0);
  EXPECT_FALSE(ops.symmetric());
  EXPECT_LE(ops.stiffness().max_asymmetry(), 1e-12);
}

TEST(Fem, PeriodicStiffnessKillsConstantsAndMassIsArea) {
  const auto g = StructuredGrid::rectangle(0.0, 0.0, 1.0 / 16, 16, 16);
  const FemOperators ops(g, fields::mat4(), Boundary::periodic);
  const std::vector<double> one(ops.dofs()->free_count(), 1.0);
  const auto k1 = ops.stiffness() * std::span<const double>(one);
  for (double v : k1) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto m1 = ops.mass() * std::span<const double>(one);
  double area = 0.0;
  for (double v : m1) area += v;
  EXPECT_NEAR(area, 1.0, 1e-13);
}

TEST(Fem, ConstantCoefficientHasZeroCorrector) {
  const auto g = StructuredGrid::box(2.0, 16);
  const FemOperators ops(g, fields::constant(Matrix2{3.0, 1.0, 1.0, 2.0}), Boundary::dirichlet0);
  for (double inv_T : {0.0, 0.5}) {
    const auto b = ops.load(Vec2{0.3, -0.7});
    EXPECT_LE(norm2(b), 1e-13);
    const auto u = solve(ops.system(inv_T, Vec2{0.3, -0.7}));
    for (double v : u.values) EXPECT_LE(std::abs(v), 1e-14);
  }
}

TEST(Fem, ManufacturedSolutionConvergesAtSecondOrder) {
  const double e16 = manufactured_error(16), e32 = manufactured_error(32), e64 = manufactured_error(64);
  EXPECT_LT(e64, 2e-3);
  EXPECT_NEAR(e16 / e32, 4.0, 0.5);
  EXPECT_NEAR(e32 / e64, 4.0, 0.5);
}

TEST(Fem, SolveResidualMeetsTolerance) {
  const auto g = StructuredGrid::box(3.0, 48);
  const FemOperators ops(g, fields::mat4(), Boundary::dirichlet0);
  const auto s = ops.system(1.0 / 0.7, Vec2{1.0, 0.0});
  SolveStats st;
  const auto u = solve(s, SolveOptions{1e-10}, &st);
  const auto r = s.matrix * std::span<const double>(u.values);
  std::vector<double> d(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) d[i] = r[i] - s.rhs[i];
  EXPECT_LE(norm2(d), 1.1e-10 * norm2(s.rhs));
  EXPECT_GT(st.iterations, 0);
}

// Galerkin orthogonality: the residual of the discrete solution vanishes
// against every basis function, so a(u_h, v) = l(v) for random v.
TEST(Fem, GalerkinOrthogonality) {
  const auto g = StructuredGrid::box(2.0, 32);
  const FemOperators ops(g, fields::mat2(), Boundary::dirichlet0);
  const auto s = ops.system(2.0, Vec2{0.0, 1.0});
  const auto u = solve(s, SolveOptions{1e-13});
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(u.values.size());
  for (auto& x : v) x = dist(rng);
  const auto Au = s.matrix * std::span<const double>(u.values);
  EXPECT_NEAR(dot(v, Au), dot(v, s.rhs), 1e-10 * norm2(s.rhs) * norm2(v));
}

TEST(Fem, PinnedPeriodicSolveIsMeanFree) {
  const auto g = StructuredGrid::rectangle(0.0, 0.0, 1.0 / 16, 16, 16);
  const FemOperators ops(g, fields::mat2(), Boundary::periodic);
  const auto u = solve(ops.system(0.0, Vec2{1.0, 0.0}));
  double mean = 0.0;
  for (double v : u.values) mean += v;
  EXPECT_NEAR(mean / u.values.size(), 0.0, 1e-12);
  EXPECT_THROW(ops.system(0.0, Vec2{1.0, 0.0}, false), Error);
}

TEST(Fem, RejectsBadTolerance) {
  const auto g = StructuredGrid::box(1.0, 8);
  const FemOperators ops(g, fields::mat2(), Boundary::dirichlet0);
  EXPECT_THROW(solve(ops.system(1.0, Vec2{1.0, 0.0}), SolveOptions{0.1}), Error);
}
