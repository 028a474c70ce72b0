#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "skew_field.hpp"

#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"

using namespace reghom;

TEST(Extrapolation, WeightsSumToOne) {
  for (int k = 1; k <= 5; ++k) {
    const auto w = extrapolation_weights(k);
    ASSERT_EQ(static_cast<int>(w.size()), k);
    Rational s = 0;
    for (const auto& v : w) s += v;
    EXPECT_EQ(s, Rational(1)) << "k=" << k;
  }
  const auto w2 = extrapolation_weights(2);
  EXPECT_EQ(w2[0], Rational(-1));
  EXPECT_EQ(w2[1], Rational(2));
  const auto w3 = extrapolation_weights(3);
  EXPECT_EQ(w3[0], Rational(1, 3));
  EXPECT_EQ(w3[1], Rational(-2));
  EXPECT_EQ(w3[2], Rational(8, 3));
}

// The ladder removes the T^{-1}, ..., T^{-(k-1)} terms of an expansion in 1/T.
TEST(Extrapolation, CombineIsExactOnPolynomialsInInverseT) {
  const double T = 3.0;
  auto u = [](double t) { return std::vector<double>{1.0 + 2.0 / t - 5.0 / (t * t) + 0.25 / (t * t * t)}; };
  const auto v = richardson_combine({u(T), u(2 * T), u(4 * T), u(8 * T)});
  EXPECT_NEAR(v[0], 1.0, 1e-13);
  const auto v2 = richardson_combine({u(T), u(2 * T)});
  EXPECT_GT(std::abs(v2[0] - 1.0), 1e-3);
}

TEST(Extrapolation, PsiIdentityHoldsOnAGrid) {
  std::vector<double> lambdas;
  for (int j = 0; j < 10; ++j) lambdas.push_back(std::pow(10.0, -2.0 + 4.0 * j / 9.0));
  for (int k = 1; k <= 5; ++k)
    for (int i = 0; i < 10; ++i) EXPECT_LE(psi_identity_check(std::pow(10.0, -1.0 + 4.0 * i / 9.0), k, lambdas), 1e-12);
  EXPECT_THROW(psi_identity_check(1.0, 6, lambdas), Error);
}

TEST(Extrapolation, PsiLevelOneAndTwoInDouble) {
  const double T = 2.0, l = 0.7;
  EXPECT_DOUBLE_EQ(psi(T, 1, l), 1.0 / (0.5 + l));
  EXPECT_NEAR(psi(T, 2, l), 2.0 / (0.25 + l) - 1.0 / (0.5 + l), 1e-14);
  EXPECT_NEAR(1.0 / l - psi(T, 2, l), psi_defect_closed_form(T, 2, l), 1e-12);
}

class CorrectorFixture : public ::testing::Test {
 protected:
  const CoefficientField mat2 = fields::mat2();
  const CoefficientField mat4 = fields::mat4();
  const StructuredGrid grid = StructuredGrid::box(2.0, 32);
};

TEST_F(CorrectorFixture, ResidualIdentityOnMat2Ladder) {
  const CorrectorProblem prob(grid, mat2, SolveOptions{1e-13});
  for (double T : {0.5, 4.0})
    for (int k = 1; k <= 3; ++k) {
      const auto a = prob.extrapolated(T, k + 1, unit_vector(0), false);
      const auto b = prob.extrapolated(2.0 * T, k, unit_vector(0), false);
      EXPECT_LE(residual_identity_check(a, b), 1e-8) << "T=" << T << " k=" << k;
    }
}

TEST_F(CorrectorFixture, ResidualIdentityRejectsWrongLevels) {
  const CorrectorProblem prob(grid, mat2);
  const auto a = prob.extrapolated(1.0, 2, unit_vector(0), false);
  EXPECT_THROW(residual_identity_check(a, prob.extrapolated(2.0, 2, unit_vector(0), false)), Error);
  EXPECT_THROW(residual_identity_check(a, prob.extrapolated(3.0, 1, unit_vector(0), false)), Error);
}

TEST_F(CorrectorFixture, DualEqualsPrimalForSymmetricFields) {
  const CorrectorProblem prob(grid, mat2);
  const auto p = prob.extrapolated(1.0, 2, Vec2{0.3, 0.8}, false);
  const auto d = prob.extrapolated(1.0, 2, Vec2{0.3, 0.8}, true);
  EXPECT_EQ(p.u.values, d.u.values);
}

TEST_F(CorrectorFixture, DualUsesTheTransposeForNonsymmetricFields) {
  const auto skew = test_fields::varying_skew();
  const CorrectorProblem prob(grid, skew, SolveOptions{1e-12});
  const CorrectorProblem tprob(grid, skew.transposed(), SolveOptions{1e-12});
  const auto d = prob.solve(1.0, unit_vector(0), true);
  const auto t = tprob.solve(1.0, unit_vector(0), false);
  const auto p = prob.solve(1.0, unit_vector(0), false);
  double gap = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < d.u.values.size(); ++i) {
    gap = std::max(gap, std::abs(d.u.values[i] - t.u.values[i]));
    diff = std::max(diff, std::abs(d.u.values[i] - p.u.values[i]));
  }
  EXPECT_LE(gap, 1e-9);
  EXPECT_GT(diff, 1e-3);
}

TEST_F(CorrectorFixture, LinearInXi) {
  const CorrectorProblem prob(grid, mat4, SolveOptions{1e-12});
  const auto a = prob.solve(1.5, unit_vector(0), false);
  const auto b = prob.solve(1.5, unit_vector(1), false);
  const auto c = prob.solve(1.5, Vec2{2.0, -3.0}, false);
  for (std::size_t i = 0; i < c.u.values.size(); ++i)
    EXPECT_NEAR(c.u.values[i], 2.0 * a.u.values[i] - 3.0 * b.u.values[i], 1e-9);
}

TEST_F(CorrectorFixture, ExtrapolateValidatesLadder) {
  const CorrectorProblem prob(grid, mat2);
  const auto a = prob.solve(1.0, unit_vector(0), false);
  const auto b = prob.solve(3.0, unit_vector(0), false);
  const auto c = prob.solve(2.0, unit_vector(1), false);
  const std::vector<CorrectorSolution> bad_T{a, b}, bad_xi{a, c};
  EXPECT_THROW(extrapolate(bad_T), Error);
  EXPECT_THROW(extrapolate(bad_xi), Error);
}

TEST_F(CorrectorFixture, RegularizationShrinksCorrectorAsTDecreases) {
  const CorrectorProblem prob(grid, mat2);
  double prev = 1e300;
  for (double T : {100.0, 1.0, 0.01}) {
    const auto u = prob.solve(T, unit_vector(0), false);
    const double n = norm2(u.u.values);
    EXPECT_LT(n, prev);
    prev = n;
  }
}

TEST_F(CorrectorFixture, ErrorMeasuresAndWindows) {
  const CorrectorProblem prob(grid, mat2);
  const auto u = prob.solve(1.0, unit_vector(0), false);
  EXPECT_EQ(corrector_error(u, u, Window::full()), 0.0);
  const GradientReference zero = [](const Vec2&) { return Vec2{}; };
  EXPECT_GT(corrector_error(u, zero, Window::inner(1.0 / 6.0)), 0.0);
  EXPECT_THROW(Window::inner(0.0), Error);
  EXPECT_THROW(Window::inner(1.5), Error);
}

TEST_F(CorrectorFixture, Deterministic) {
  const CorrectorProblem prob(grid, mat4);
  const auto a = prob.extrapolated(0.8, 3, unit_vector(1), false);
  const auto b = prob.extrapolated(0.8, 3, unit_vector(1), false);
  EXPECT_EQ(a.u.values, b.u.values);
}

TEST(Corrector, InverseT) {
  EXPECT_EQ(inverse_T(infinite_T), 0.0);
  EXPECT_DOUBLE_EQ(inverse_T(4.0), 0.25);
  EXPECT_THROW(inverse_T(0.0), Error);
  EXPECT_THROW(inverse_T(-1.0), Error);
}
