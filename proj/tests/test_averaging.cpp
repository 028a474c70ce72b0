#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "skew_field.hpp"

#include "reghom/averaging.hpp"
#include "reghom/coeffs.hpp"

using namespace reghom;

namespace {

const std::vector<int> kOrders{0, 1, 2, 3, 4, Filter::infinite};

// Composite Simpson on [-1, 1] split at the breakpoints of the profiles.
double simpson_mass(const Filter& f) {
  const double br[] = {-1.0, -1.0 / 3.0, -1.0 / 9.0, 1.0 / 9.0, 1.0 / 3.0, 1.0};
  double total = 0.0;
  for (int p = 0; p < 5; ++p) {
    const int n = 20000;
    const double a = br[p], h = (br[p + 1] - a) / n;
    double s = f(a) + f(br[p + 1]);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    total += s * h / 3.0;
  }
  return total;
}

double one_sided_slope(const Filter& f, double x, double dx) { return (f(x + dx) - f(x)) / dx; }

}  // namespace

TEST(Filter, UnitMassByIndependentQuadrature) {
  for (int p : kOrders) EXPECT_NEAR(simpson_mass(build_filter(p)), 1.0, 1e-9) << "p=" << p;
}

// kappa_p = 1 / int_0^1 raw; the finite orders have rational values.
TEST(Filter, NormalizationConstants) {
  EXPECT_DOUBLE_EQ(build_filter(0).kappa(), 1.0);
  EXPECT_NEAR(build_filter(1).kappa(), 4.5, 1e-12);
  EXPECT_NEAR(build_filter(2).kappa(), 40.5, 1e-10);
  EXPECT_NEAR(build_filter(3).kappa(), 1215.0 / 11.0, 1e-9);
  EXPECT_NEAR(build_filter(4).kappa(), 283.5, 1e-9);
  EXPECT_NEAR(build_filter(Filter::infinite).kappa() / 8.9336e16, 1.0, 1e-4);
}

TEST(Filter, EvenNonIncreasingAndSupported) {
  for (int p : kOrders) {
    const Filter f = build_filter(p);
    double prev = f(0.0);
    for (int i = 1; i <= 3000; ++i) {
      const double x = i / 3000.0;
      EXPECT_EQ(f(x), f(-x)) << "p=" << p;
      EXPECT_LE(f(x), prev + 1e-12) << "p=" << p << " x=" << x;
      prev = f(x);
      EXPECT_GE(f(x), 0.0);
      if (p > 0 && x > 1.0 / 3.0) {
        EXPECT_EQ(f(x), 0.0) << "p=" << p;
      }
    }
    EXPECT_EQ(f(1.5), 0.0);
  }
}

// C^{p-1}: values agree across the interior breakpoint x = 1/9 for p >= 1,
// first derivatives for p >= 2, second derivatives for p >= 3.
TEST(Filter, SmoothnessAcrossBreakpoints) {
  const double b = 1.0 / 9.0, d = 1e-5;
  for (int p : {1, 2, 3, 4}) {
    const Filter f = build_filter(p);
    const double scale = f(0.0);
    EXPECT_NEAR(f(b - 1e-12), f(b + 1e-12), 1e-9 * scale) << "p=" << p;
    if (p >= 2) {
      const double l = one_sided_slope(f, b - d, d), r = one_sided_slope(f, b, d);
      EXPECT_NEAR(l, r, 1e-3 * scale * 9.0) << "p=" << p;
    }
    if (p >= 3) {
      const double l2 = (f(b) - 2 * f(b - d) + f(b - 2 * d)) / (d * d);
      const double r2 = (f(b + 2 * d) - 2 * f(b + d) + f(b)) / (d * d);
      EXPECT_NEAR(l2, r2, 1e-2 * std::max(std::abs(l2), 1.0)) << "p=" << p;
    }
    EXPECT_NEAR(f(1.0 / 3.0 - 1e-12), 0.0, 1e-9 * scale);
  }
}

TEST(Filter, ParseAndReject) {
  EXPECT_EQ(parse_filter_order("inf"), Filter::infinite);
  EXPECT_EQ(parse_filter_order("3"), 3);
  EXPECT_THROW(parse_filter_order("x"), Error);
  EXPECT_THROW(build_filter(5), Error);
  EXPECT_THROW(build_filter(-1), Error);
}

TEST(Averaging, WeightsSumToOneIncludingClippedWindows) {
  const auto g = StructuredGrid::box(3.0, 48);
  for (int p : kOrders) {
    const Filter f = build_filter(p);
    for (const AveragingWindow w : {AveragingWindow{{0.0, 0.0}, 1.0}, AveragingWindow{{2.9, -2.5}, 3.0}}) {
      double raw = 0.0;
      const auto ws = filter_weights(g, f, w, &raw);
      double s = 0.0;
      for (double v : ws) s += v;
      EXPECT_NEAR(s, 1.0, 1e-13);
      EXPECT_GT(raw, 0.0);
    }
  }
}

TEST(Averaging, FilteredAverageOfConstantsAndBadWindow) {
  const auto g = StructuredGrid::box(2.0, 32);
  const std::vector<double> c(4 * g.cell_count(), 7.0);
  EXPECT_NEAR(filtered_average(g, c, build_filter(2), 1.0), 7.0, 1e-12);
  EXPECT_THROW(filtered_average(g, c, build_filter(2), 2.5), Error);
}

TEST(Averaging, ConstantFieldTensorIsExact) {
  const Matrix2 m{3.0, 0.5, -0.25, 2.0};
  for (auto v : {TensorVariant::prime, TensorVariant::projected}) {
    const auto t = hom_tensor(fields::constant(m), 1.0, 2, 2.0, 32, 1.0, build_filter(3), v);
    EXPECT_LE(max_norm_distance(t.a, m), 1e-12);
  }
}

class Mat2Ladder : public ::testing::Test {
 protected:
  std::shared_ptr<const CorrectorProblem> prob =
      std::make_shared<const CorrectorProblem>(StructuredGrid::box(3.0, 48), fields::mat2(), SolveOptions{1e-12});
};

TEST_F(Mat2Ladder, ProjectedTensorIsSymmetricAndCoercive) {
  const CorrectorLadder lad(prob, 0.5, 2);
  const double alpha = fields::mat2().alpha_hint;
  for (int p : kOrders)
    for (int k = 1; k <= 2; ++k) {
      const auto t = lad.tensor(k, 1.0, build_filter(p), TensorVariant::projected);
      EXPECT_NEAR(t.a.a12, t.a.a21, 1e-12 * t.a.max_abs());
      EXPECT_GE(t.min_sym_eigenvalue, alpha);
    }
}

TEST_F(Mat2Ladder, BilinearFormMatchesTensorForRandomDirections) {
  const CorrectorLadder lad(prob, 0.5, 2);
  const Filter f = build_filter(2);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto v : {TensorVariant::prime, TensorVariant::projected}) {
    const auto t = lad.tensor(2, 1.5, f, v);
    for (int i = 0; i < 10; ++i) {
      const Vec2 xi{u(rng), u(rng)}, xp{u(rng), u(rng)};
      const double direct = windowed_bilinear(*prob, 0.5, 2, 1.5, f, v, xp, xi);
      EXPECT_NEAR(direct, dot(xp, t.a * xi), 1e-8 * t.a.max_abs());
    }
  }
}

TEST_F(Mat2Ladder, ProjectionRemovesMeanGradient) {
  const CorrectorLadder lad(prob, 0.5, 1);
  const Filter f = build_filter(1);
  const auto prime = lad.tensor(1, 1.0, f, TensorVariant::prime);
  const auto proj = lad.tensor(1, 1.0, f, TensorVariant::projected);
  EXPECT_GT(norm(prime.mean_gradient[0]), 0.0);
  EXPECT_EQ(proj.mean_gradient[0].x, prime.mean_gradient[0].x);
  EXPECT_GT(max_norm_distance(prime.a, proj.a), 0.0);
  EXPECT_THROW(lad.tensor(1, 4.0, f, TensorVariant::prime), Error);
  EXPECT_THROW(lad.tensor(2, 1.0, f, TensorVariant::prime), Error);
}

TEST(Averaging, NonsymmetricDualMatchesTranspose) {
  auto prob = std::make_shared<const CorrectorProblem>(StructuredGrid::box(2.0, 32), test_fields::varying_skew(), SolveOptions{1e-12});
  auto tprob = std::make_shared<const CorrectorProblem>(StructuredGrid::box(2.0, 32), test_fields::varying_skew().transposed(),
                                                        SolveOptions{1e-12});
  const Filter f = build_filter(2);
  const auto a = CorrectorLadder(prob, 1.0, 1).tensor(1, 1.0, f, TensorVariant::projected).a;
  const auto at = CorrectorLadder(tprob, 1.0, 1).tensor(1, 1.0, f, TensorVariant::projected).a;
  EXPECT_LE(max_norm_distance(a.transpose(), at), 1e-8 * a.max_abs());
}

TEST(Averaging, VariantNames) {
  EXPECT_EQ(parse_variant("prime"), TensorVariant::prime);
  EXPECT_STREQ(to_string(TensorVariant::projected), "projected");
  EXPECT_THROW(parse_variant("other"), Error);
}
