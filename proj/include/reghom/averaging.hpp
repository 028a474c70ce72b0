#pragma once

// Filters of order p, filtered averages and the windowed homogenized tensors.

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"
#include "reghom/error.hpp"
#include "reghom/fem.hpp"
#include "reghom/grid.hpp"

namespace reghom {

class Filter;
inline Filter build_filter(int p);

/// Mass-one even profile on [-1, 1]. Profiles of order >= 1 are built on
/// [0, 1] with support [1/3, 2/3] and mapped by t = (x + 1) / 2.
class Filter {
 public:
  static constexpr int infinite = std::numeric_limits<int>::max();

  int order() const { return order_; }
  double kappa() const { return kappa_; }
  bool smooth() const { return order_ == infinite; }
  std::string label() const { return smooth() ? "inf" : std::to_string(order_); }

  /// Radius of the support in [-1, 1] coordinates.
  double support_radius() const { return order_ == 0 ? 1.0 : 1.0 / 3.0; }

  /// Unnormalized profile on [0, 1].
  double raw(double t) const {
    if (order_ == 0) return (t >= 0.0 && t <= 1.0) ? 1.0 : 0.0;
    if (t <= 1.0 / 3.0 || t >= 2.0 / 3.0) return 0.0;
    if (smooth()) return std::exp(-1.0 / ((t - 1.0 / 3.0) * (2.0 / 3.0 - t)));
    const double s = t - 0.5;
    const bool left = t <= 4.0 / 9.0;
    const bool right = t > 5.0 / 9.0;
    const double e = left ? 3.0 * t - 1.0 : 2.0 - 3.0 * t;  // outer pieces
    switch (order_) {
      case 1:
        return (left || right) ? 3.0 * e : 1.0;
      case 2:
        return (left || right) ? e * e : 1.0 / 6.0 - 18.0 * s * s;
      case 3:
        return (left || right) ? e * e * e : 17.0 / 216.0 - 18.0 * s * s + 1458.0 * s * s * s * s;
      case 4: {
        if (left || right) return e * e * e * e;
        const double s2 = s * s;
        return 1.0 / 27.0 - 13.5 * s2 + 2268.0 * s2 * s2 - 157464.0 * s2 * s2 * s2;
      }
      default:
        return 0.0;
    }
  }

  /// mu(x) on [-1, 1], zero outside.
  double operator()(double x) const {
    const double a = std::abs(x);
    if (a > 1.0) return 0.0;
    if (order_ == 0) return 0.5;
    return 0.5 * kappa_ * raw(0.5 * (1.0 - a));
  }

  /// mu_L(x) = L^{-2} mu(x1 / L) mu(x2 / L).
  double scaled(const Vec2& x, double L) const {
    return (*this)(x.x / L) * (*this)(x.y / L) / (L * L);
  }

 private:
  friend Filter build_filter(int p);
  int order_ = 0;
  double kappa_ = 1.0;
};

inline Filter build_filter(int p) {
  if (!((p >= 0 && p <= 4) || p == Filter::infinite))
    throw Error("build_filter: unsupported order " + std::to_string(p) +
                " (supported: 0, 1, 2, 3, 4, inf)");
  Filter f;
  f.order_ = p;
  if (p == 0) return f;
  using boost::math::quadrature::gauss_kronrod;
  auto raw = [&f](double t) { return f.raw(t); };
  double mass = 0.0;
  if (f.smooth()) {
    mass = gauss_kronrod<double, 61>::integrate(raw, 1.0 / 3.0, 2.0 / 3.0, 15, 1e-15);
  } else {
    const double br[] = {1.0 / 3.0, 4.0 / 9.0, 5.0 / 9.0, 2.0 / 3.0};
    for (int i = 0; i < 3; ++i)
      mass += gauss_kronrod<double, 31>::integrate(raw, br[i], br[i + 1], 10, 1e-15);
  }
  f.kappa_ = 1.0 / mass;
  return f;
}

/// Accepts 0..4 and inf / infinity.
inline int parse_filter_order(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "Inf") return Filter::infinite;
  try {
    std::size_t used = 0;
    const int p = std::stoi(s, &used);
    if (used == s.size()) return p;
  } catch (const std::logic_error&) {
  }
  throw Error("bad filter order '" + s + "' (expected 0..4 or inf)");
}

struct AveragingWindow {
  Vec2 center{0.0, 0.0};
  double L = 1.0;
};

/// Gauss-point weights mu_L(x_q - c) |cell| / 4 over the grid, normalized so
/// they sum to one. The grid is the integration domain, so a window clipped
/// by the grid is divided by its clipped mass. `raw_mass` receives the sum
/// before normalization.
inline std::vector<double> filter_weights(const StructuredGrid& g, const Filter& f,
                                          const AveragingWindow& w, double* raw_mass = nullptr) {
  if (!(w.L > 0.0)) throw Error("filter_weights: L must be positive");
  std::vector<double> out(4 * static_cast<std::size_t>(g.cell_count()), 0.0);
  const double cell_w = 0.25 * g.h * g.h;
  double mass = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      for (int q = 0; q < 4; ++q) {
        const double v = cell_w * f.scaled(gauss::point(g, i, j, q) - w.center, w.L);
        out[4 * g.cell_index(i, j) + q] = v;
        mass += v;
      }
  if (raw_mass) *raw_mass = mass;
  if (!(mass > 0.0)) throw Error("filter_weights: window does not meet the grid");
  for (double& v : out) v /= mass;
  return out;
}

/// Filtered average over the window of half-width L centred on the grid.
inline double filtered_average(const StructuredGrid& g, std::span<const double> samples,
                               const Filter& f, double L) {
  if (L > g.half_width() * (1.0 + 1e-12))
    throw Error("filtered_average: L exceeds the half-width of the grid");
  if (samples.size() != 4 * static_cast<std::size_t>(g.cell_count()))
    throw Error("filtered_average: one sample per Gauss point expected");
  const auto w = filter_weights(g, f, {g.center(), L});
  double s = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) s += w[a] * samples[a];
  return s;
}

enum class TensorVariant { prime, projected };

inline const char* to_string(TensorVariant v) {
  return v == TensorVariant::prime ? "prime" : "projected";
}

inline TensorVariant parse_variant(const std::string& s) {
  if (s == "prime") return TensorVariant::prime;
  if (s == "projected") return TensorVariant::projected;
  throw Error("unknown tensor variant '" + s + "' (expected prime|projected)");
}

struct HomTensorParams {
  double T = infinite_T;
  int k = 1;
  double R = 0.0;
  double L = 0.0;
  int p = 0;
  double rel_tol = 1e-10;
  TensorVariant variant = TensorVariant::prime;
  double h = 0.0;
};

struct HomTensor {
  Matrix2 a;
  HomTensorParams params;
  double min_sym_eigenvalue = 0.0;
  std::array<Vec2, 2> mean_gradient{};       // filtered means of grad phi_{e_j}
  std::array<Vec2, 2> mean_gradient_dual{};  // same for the dual correctors
  double raw_filter_mass = 0.0;
};

/// Per-Gauss-point corrector gradients for xi = e1, e2 and their duals.
struct GradientSet {
  std::array<std::vector<Vec2>, 2> primal;
  std::array<std::vector<Vec2>, 2> dual;
};

/// sum_q w_q (e_i + g'_i) . A_q (e_j + g_j), optionally with gradients made
/// mean free for the weights first.
inline Matrix2 windowed_tensor(const CoefficientSamples& A, const GradientSet& g,
                               std::span<const double> w, TensorVariant variant,
                               std::array<Vec2, 2>* means = nullptr,
                               std::array<Vec2, 2>* means_dual = nullptr) {
  auto mean_of = [&](const std::vector<Vec2>& v) {
    Vec2 m{};
    for (std::size_t a = 0; a < w.size(); ++a) m += w[a] * v[a];
    return m;
  };
  std::array<Vec2, 2> mp{}, md{};
  for (int j = 0; j < 2; ++j) {
    mp[j] = mean_of(g.primal[j]);
    md[j] = mean_of(g.dual[j]);
  }
  if (means) *means = mp;
  if (means_dual) *means_dual = md;
  const bool proj = variant == TensorVariant::projected;
  Matrix2 out;
  for (std::size_t a = 0; a < w.size(); ++a) {
    if (w[a] == 0.0) continue;
    const Matrix2& Aq = A.a[a];
    for (int j = 0; j < 2; ++j) {
      const Vec2 gj = proj ? g.primal[j][a] - mp[j] : g.primal[j][a];
      const Vec2 flux = Aq * (unit_vector(j) + gj);
      for (int i = 0; i < 2; ++i) {
        const Vec2 gi = proj ? g.dual[i][a] - md[i] : g.dual[i][a];
        out.at(i, j) += w[a] * dot(unit_vector(i) + gi, flux);
      }
    }
  }
  return out;
}

/// Level-one corrector solves on T, 2T, ..., 2^{kmax-1} T for xi = e1, e2
/// (and their duals for nonsymmetric fields), extrapolated on demand.
class CorrectorLadder {
 public:
  CorrectorLadder(std::shared_ptr<const CorrectorProblem> problem, double T, int kmax)
      : problem_(std::move(problem)), T_(T), kmax_(kmax) {
    for (int j = 0; j < 2; ++j) {
      primal_[j] = problem_->ladder(T, kmax, unit_vector(j), false);
      if (!problem_->symmetric()) dual_[j] = problem_->ladder(T, kmax, unit_vector(j), true);
    }
  }

  const CorrectorProblem& problem() const { return *problem_; }
  double T() const { return T_; }
  int kmax() const { return kmax_; }

  CorrectorSolution solution(int k, int j, bool dual) const {
    if (k < 1 || k > kmax_) throw Error("CorrectorLadder: level outside the computed ladder");
    const auto& lad = (dual && !problem_->symmetric()) ? dual_[j] : primal_[j];
    return extrapolate(std::span<const CorrectorSolution>(lad.data(), k));
  }

  GradientSet gradients(int k) const {
    GradientSet g;
    for (int j = 0; j < 2; ++j) {
      g.primal[j] = solution(k, j, false).gradients();
      g.dual[j] = problem_->symmetric() ? g.primal[j] : solution(k, j, true).gradients();
    }
    return g;
  }

  /// The windowed tensor at level k, window centred on the box.
  HomTensor tensor(int k, double L, const Filter& f, TensorVariant variant) const {
    const auto& grid = problem_->grid();
    if (L > grid.half_width() * (1.0 + 1e-12)) throw Error("hom_tensor: L must not exceed R");
    HomTensor t;
    const auto w = filter_weights(grid, f, {grid.center(), L}, &t.raw_filter_mass);
    const auto g = gradients(k);
    t.a = windowed_tensor(*problem_->operators(false)->coefficients(), g, w, variant,
                          &t.mean_gradient, &t.mean_gradient_dual);
    t.params = {T_, k, grid.half_width(), L, f.order(), problem_->options().rel_tol, variant,
                grid.h};
    t.min_sym_eigenvalue = t.a.min_sym_eigenvalue();
    return t;
  }

 private:
  std::shared_ptr<const CorrectorProblem> problem_;
  double T_;
  int kmax_;
  std::array<std::vector<CorrectorSolution>, 2> primal_, dual_;
};

inline HomTensor hom_tensor(const CoefficientField& field, double T, int k, double R, int n,
                            double L, const Filter& f, TensorVariant variant,
                            double rel_tol = 1e-10) {
  auto prob = std::make_shared<const CorrectorProblem>(StructuredGrid::box(R, n), field,
                                                       SolveOptions{rel_tol});
  return CorrectorLadder(prob, T, k).tensor(k, L, f, variant);
}

/// A'_{T,k,R,L,p} on the n x n grid of Q_R.
inline HomTensor hom_tensor_prime(const CoefficientField& field, double T, int k, double R, int n,
                                  double L, const Filter& f, double rel_tol = 1e-10) {
  return hom_tensor(field, T, k, R, n, L, f, TensorVariant::prime, rel_tol);
}

/// A_{T,k,R,L,p}: as above with mu_L-mean-free corrector gradients.
inline HomTensor hom_tensor_projected(const CoefficientField& field, double T, int k, double R,
                                      int n, double L, const Filter& f, double rel_tol = 1e-10) {
  return hom_tensor(field, T, k, R, n, L, f, TensorVariant::projected, rel_tol);
}

/// xi' . A xi from correctors solved for xi and (dually) xi' directly.
inline double windowed_bilinear(const CorrectorProblem& prob, double T, int k, double L,
                                const Filter& f, TensorVariant variant, const Vec2& xi_prime,
                                const Vec2& xi) {
  const auto& grid = prob.grid();
  const auto w = filter_weights(grid, f, {grid.center(), L});
  const auto g = prob.extrapolated(T, k, xi, false).gradients();
  const auto gd = prob.extrapolated(T, k, xi_prime, true).gradients();
  const auto& A = *prob.operators(false)->coefficients();
  Vec2 m{}, md{};
  if (variant == TensorVariant::projected)
    for (std::size_t a = 0; a < w.size(); ++a) {
      m += w[a] * g[a];
      md += w[a] * gd[a];
    }
  double s = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a)
    s += w[a] * dot(xi_prime + gd[a] - md, A.a[a] * (xi + g[a] - m));
  return s;
}

}  // namespace reghom
