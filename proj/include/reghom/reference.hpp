#pragma once

// Periodic cell problems and the closed-form laminate tensor.

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"
#include "reghom/error.hpp"
#include "reghom/fem.hpp"
#include "reghom/grid.hpp"

namespace reghom {

struct CellProblemResult {
  std::shared_ptr<const FemOperators> ops;
  std::shared_ptr<const FemOperators> ops_dual;
  std::array<DofVector, 2> correctors;       // xi = e1, e2
  std::array<DofVector, 2> dual_correctors;  // for the transpose field
  Matrix2 a_hom;
  double h = 0.0;
  int iterations = 0;

  /// Gradient of corrector j at any point of R^2, by periodic extension.
  GradientReference gradient(int j, bool dual = false) const {
    const auto& u = dual ? dual_correctors[j] : correctors[j];
    auto interp = std::make_shared<const Q1Interpolant>(u.grid(), u.nodal(), true);
    return [interp](const Vec2& x) { return interp->gradient(x); };
  }
};

/// Cell problem on one period with periodic bc and zero mean, n cells along
/// the first period vector.
inline CellProblemResult periodic_cell(const CoefficientField& field, int n,
                                       double rel_tol = 1e-10) {
  if (!field.period) throw Error("periodic_cell: field '" + field.name + "' has no period");
  const Vec2 per = *field.period;
  const double h = per.x / n;
  const double ny_real = per.y / h;
  const int ny = static_cast<int>(std::lround(ny_real));
  if (std::abs(ny_real - ny) > 1e-9 * ny_real)
    throw Error("periodic_cell: period lengths are not commensurate with square cells");
  const auto grid = StructuredGrid::rectangle(0.0, 0.0, h, n, ny);
  auto dofs = std::make_shared<const DofMap>(grid, Boundary::periodic);
  auto samples = std::make_shared<const CoefficientSamples>(sample_coefficients(grid, field));
  CellProblemResult res;
  res.ops = std::make_shared<const FemOperators>(dofs, samples);
  res.ops_dual = field.is_symmetric
                     ? res.ops
                     : std::make_shared<const FemOperators>(
                           dofs, std::make_shared<const CoefficientSamples>(samples->transposed()));
  res.h = h;
  const SolveOptions opt{rel_tol, 0};
  for (int j = 0; j < 2; ++j) {
    SolveStats st;
    res.correctors[j] = solve(res.ops->system(0.0, unit_vector(j)), opt, &st);
    res.iterations += st.iterations;
    if (field.is_symmetric) {
      res.dual_correctors[j] = res.correctors[j];
    } else {
      res.dual_correctors[j] = solve(res.ops_dual->system(0.0, unit_vector(j)), opt, &st);
      res.iterations += st.iterations;
    }
  }
  std::array<std::vector<Vec2>, 2> g, gd;
  for (int j = 0; j < 2; ++j) {
    g[j] = gradient_field(res.correctors[j]);
    gd[j] = gradient_field(res.dual_correctors[j]);
  }
  const double w = 1.0 / static_cast<double>(g[0].size());
  for (std::size_t a = 0; a < g[0].size(); ++a)
    for (int j = 0; j < 2; ++j) {
      const Vec2 flux = samples->a[a] * (unit_vector(j) + g[j][a]);
      for (int i = 0; i < 2; ++i) res.a_hom.at(i, j) += w * dot(unit_vector(i) + gd[i][a], flux);
    }
  return res;
}

/// diag(harmonic mean, arithmetic mean) of a 1-periodic profile.
inline Matrix2 laminate_oracle(const std::function<double(double)>& a) {
  for (int i = 0; i < 1000; ++i) {
    const double t = (i + 0.5) / 1000.0;
    const double v = a(t);
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("laminate_oracle: profile must be positive");
  }
  using boost::math::quadrature::gauss_kronrod;
  double arith = 0.0, harm = 0.0;
  // Split at 1/2 so two-phase profiles are integrated piecewise smoothly.
  for (const auto& [lo, hi] : {std::pair{0.0, 0.5}, std::pair{0.5, 1.0}}) {
    arith += gauss_kronrod<double, 61>::integrate(a, lo, hi, 20, 1e-14);
    harm += gauss_kronrod<double, 61>::integrate([&](double t) { return 1.0 / a(t); }, lo, hi,
                                                 20, 1e-14);
  }
  return Matrix2::diag(1.0 / harm, arith);
}

inline Matrix2 laminate_oracle(const LaminateProfile& p) { return laminate_oracle(p.a); }

}  // namespace reghom
