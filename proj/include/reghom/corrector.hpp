#pragma once

// Regularized correctors on Q_R, Richardson extrapolation in T and corrector errors.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/rational.hpp>

#include "reghom/coeffs.hpp"
#include "reghom/error.hpp"
#include "reghom/fem.hpp"
#include "reghom/grid.hpp"

namespace reghom {

inline constexpr double infinite_T = std::numeric_limits<double>::infinity();

inline double inverse_T(double T) {
  if (std::isinf(T)) return 0.0;
  if (!(T > 0.0)) throw Error("regularization parameter T must be positive or infinite");
  return 1.0 / T;
}

struct CorrectorSolution {
  std::shared_ptr<const FemOperators> ops;  // operators of the field actually solved (A or A^T)
  DofVector u;
  double T = infinite_T;
  int k = 1;
  Vec2 xi{1.0, 0.0};
  bool dual = false;
  Boundary bc = Boundary::dirichlet0;
  int iterations = 0;

  const StructuredGrid& grid() const { return u.grid(); }
  std::vector<double> nodal() const { return u.nodal(); }
  std::vector<Vec2> gradients() const { return gradient_field(u); }
};

/// One box, one field: caches the primal and dual operators for every solve
/// of a ladder or tensor computation.
class CorrectorProblem {
 public:
  CorrectorProblem(const StructuredGrid& grid, const CoefficientField& field,
                   SolveOptions opt = {})
      : opt_(opt) {
    auto dofs = std::make_shared<const DofMap>(grid, Boundary::dirichlet0);
    auto samples = std::make_shared<const CoefficientSamples>(sample_coefficients(grid, field));
    primal_ = std::make_shared<const FemOperators>(dofs, samples);
    dual_ = field.is_symmetric ? primal_
                               : std::make_shared<const FemOperators>(
                                     dofs, std::make_shared<const CoefficientSamples>(
                                               samples->transposed()));
  }

  const StructuredGrid& grid() const { return primal_->grid(); }
  bool symmetric() const { return primal_->symmetric(); }
  const SolveOptions& options() const { return opt_; }
  const std::shared_ptr<const FemOperators>& operators(bool dual) const {
    return dual ? dual_ : primal_;
  }

  CorrectorSolution solve(double T, const Vec2& xi, bool dual,
                          const std::vector<double>* guess = nullptr) const {
    const auto& ops = operators(dual);
    const SparseSystem sys = ops->system(inverse_T(T), xi);
    SolveStats st;
    DofVector u = reghom::solve(sys, opt_, &st, guess);
    return {ops, std::move(u), T, 1, xi, dual, Boundary::dirichlet0, st.iterations};
  }

  /// Level-one solves at T, 2T, ..., 2^{k-1} T.
  std::vector<CorrectorSolution> ladder(double T, int k, const Vec2& xi, bool dual) const {
    if (k < 1) throw Error("extrapolation level must be at least 1");
    if (std::isinf(T) && k > 1) throw Error("T = infinity admits no extrapolation (k must be 1)");
    std::vector<CorrectorSolution> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      const std::vector<double>* guess = out.empty() ? nullptr : &out.back().u.values;
      out.push_back(solve(std::ldexp(T, i), xi, dual, guess));
    }
    return out;
  }

  CorrectorSolution extrapolated(double T, int k, const Vec2& xi, bool dual) const;

 private:
  SolveOptions opt_;
  std::shared_ptr<const FemOperators> primal_;
  std::shared_ptr<const FemOperators> dual_;
};

/// phi_{T,R} (or the dual phi'_{T,R}) with homogeneous Dirichlet data on Q_R.
inline CorrectorSolution solve_regularized(const StructuredGrid& grid, const CoefficientField& field,
                                           double T, const Vec2& xi, bool dual,
                                           SolveOptions opt = {}) {
  return CorrectorProblem(grid, field, opt).solve(T, xi, dual);
}

namespace detail {

inline void check_same_problem(const CorrectorSolution& a, const CorrectorSolution& b,
                               const char* who) {
  if (!(a.grid() == b.grid())) throw Error(std::string(who) + ": solutions live on different grids");
  if (a.xi.x != b.xi.x || a.xi.y != b.xi.y)
    throw Error(std::string(who) + ": solutions have different directions xi");
  if (a.dual != b.dual) throw Error(std::string(who) + ": primal and dual solutions mixed");
}

inline bool is_double_of(double big, double small) {
  return std::abs(big - 2.0 * small) <= 1e-12 * big;
}

}  // namespace detail

/// Applies v_{m+1}[i] = (2^m v_m[i+1] - v_m[i]) / (2^m - 1) to vectors taken at
/// T, 2T, 4T, ... and returns the top level.
inline std::vector<double> richardson_combine(std::vector<std::vector<double>> level) {
  if (level.empty()) throw Error("richardson_combine: empty ladder");
  for (const auto& v : level)
    if (v.size() != level[0].size()) throw Error("richardson_combine: vector lengths differ");
  for (std::size_t m = 1; m < level.size(); ++m) {
    const double p = std::ldexp(1.0, static_cast<int>(m));
    for (std::size_t i = 0; i + m < level.size(); ++i)
      for (std::size_t a = 0; a < level[i].size(); ++a)
        level[i][a] = (p * level[i + 1][a] - level[i][a]) / (p - 1.0);
  }
  return std::move(level[0]);
}

/// phi_{T,k} from level-one solves on the dyadic ladder T, 2T, ..., 2^{k-1} T:
/// phi_{T,m+1} = (2^m phi_{2T,m} - phi_{T,m}) / (2^m - 1).
inline CorrectorSolution extrapolate(std::span<const CorrectorSolution> sols) {
  if (sols.empty()) throw Error("extrapolate: empty ladder");
  for (std::size_t i = 0; i < sols.size(); ++i) {
    detail::check_same_problem(sols[0], sols[i], "extrapolate");
    if (sols[i].k != 1) throw Error("extrapolate: ladder entries must be level-one solves");
    if (i > 0 && !detail::is_double_of(sols[i].T, sols[i - 1].T))
      throw Error("extrapolate: T values do not form the ladder T, 2T, 4T, ...");
  }
  if (sols.size() > 1 && std::isinf(sols[0].T))
    throw Error("extrapolate: T = infinity admits no extrapolation");
  std::vector<std::vector<double>> level;
  level.reserve(sols.size());
  for (const auto& s : sols) level.push_back(s.u.values);
  CorrectorSolution out = sols[0];
  out.u.values = richardson_combine(std::move(level));
  out.k = static_cast<int>(sols.size());
  for (std::size_t i = 1; i < sols.size(); ++i) out.iterations += sols[i].iterations;
  return out;
}

inline CorrectorSolution CorrectorProblem::extrapolated(double T, int k, const Vec2& xi,
                                                        bool dual) const {
  const auto lad = ladder(T, k, xi, dual);
  return extrapolate(lad);
}

/// Exact rational weights c_i with phi_{T,k} = sum_i c_i phi_{2^i T}.
using Rational = boost::rational<long long>;

inline std::vector<Rational> extrapolation_weights(int k) {
  if (k < 1 || k > 12) throw Error("extrapolation_weights: k must lie in [1, 12]");
  std::vector<std::vector<Rational>> level(k);
  for (int i = 0; i < k; ++i) {
    level[i].assign(k, Rational(0));
    level[i][i] = Rational(1);
  }
  for (int m = 1; m < k; ++m) {
    const long long p = 1LL << m;
    for (int i = 0; i + m < k; ++i)
      for (int j = 0; j < k; ++j) level[i][j] = (level[i + 1][j] * p - level[i][j]) / (p - 1);
  }
  return level[0];
}

/// || M_T phi_{T,k+1} - rhs(xi) - T^{-1} Mass phi_{2T,k} || / || rhs(xi) ||.
inline double residual_identity_check(const CorrectorSolution& phi_Tk1,
                                      const CorrectorSolution& phi_2Tk) {
  detail::check_same_problem(phi_Tk1, phi_2Tk, "residual_identity_check");
  if (phi_Tk1.k != phi_2Tk.k + 1)
    throw Error("residual_identity_check: levels must be k+1 at T and k at 2T");
  if (std::isinf(phi_Tk1.T) || !detail::is_double_of(phi_2Tk.T, phi_Tk1.T))
    throw Error("residual_identity_check: second solution must be taken at 2T");
  const FemOperators& ops = *phi_Tk1.ops;
  const double inv_T = 1.0 / phi_Tk1.T;
  const CsrMatrix m = ops.op(inv_T);
  std::vector<double> r = m * std::span<const double>(phi_Tk1.u.values);
  const auto b = ops.load(phi_Tk1.xi);
  const auto mv = ops.mass() * std::span<const double>(phi_2Tk.u.values);
  for (std::size_t a = 0; a < r.size(); ++a) r[a] -= b[a] + inv_T * mv[a];
  const double bn = norm2(b);
  const double rn = norm2(r);
  if (bn == 0.0) return rn;
  return rn / bn;
}

/// psi_{T,1}(l) = 1 / (T^{-1} + l), psi_{T,k+1} = (2^k psi_{2T,k} - psi_{T,k}) / (2^k - 1).
template <class Real = double>
Real psi(Real T, int k, Real lambda) {
  if (k < 1) throw Error("psi: level must be at least 1");
  if (k == 1) return Real(1) / (Real(1) / T + lambda);
  const Real p = Real(1LL << (k - 1));
  return (p * psi<Real>(T * 2, k - 1, lambda) - psi<Real>(T, k - 1, lambda)) / (p - Real(1));
}

/// Closed form of 1/l - psi_{T,k}(l).
template <class Real = double>
Real psi_defect_closed_form(Real T, int k, Real lambda) {
  Real prod = lambda;
  for (int i = 0; i < k; ++i) prod *= Real(1) / (T * Real(1LL << i)) + lambda;
  using std::pow;
  const Real scale = Real(1) / (Real(std::ldexp(1.0, k * (k - 1) / 2)) * pow(T, k));
  return scale / prod;
}

/// Max relative gap between 1/l - psi_{T,k}(l), computed by the induction, and
/// its closed form. Both sides are evaluated in 100-digit arithmetic because
/// the defect underflows the double-precision cancellation floor for large T l.
inline double psi_identity_check(double T, int k, std::span<const double> lambdas) {
  using Big = boost::multiprecision::cpp_bin_float_100;
  if (!(T > 0.0)) throw Error("psi_identity_check: T must be positive");
  if (k < 1 || k > 5) throw Error("psi_identity_check: k must lie in [1, 5]");
  double worst = 0.0;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw Error("psi_identity_check: lambda must be positive");
    const Big lam(l), t(T);
    const Big lhs = Big(1) / lam - psi<Big>(t, k, lam);
    const Big rhs = psi_defect_closed_form<Big>(t, k, lam);
    worst = std::max(worst, static_cast<double>(boost::multiprecision::abs(lhs - rhs) /
                                                boost::multiprecision::abs(rhs)));
  }
  return worst;
}

/// Cells whose centre lies in the centred sub-box of half-width f R.
struct Window {
  double fraction = 1.0;

  static Window full() { return {1.0}; }
  static Window inner(double f) {
    if (!(f > 0.0 && f <= 1.0)) throw Error("window fraction must lie in (0, 1]");
    return {f};
  }

  bool contains_cell(const StructuredGrid& g, int i, int j) const {
    const Vec2 c = g.cell_center(i, j) - g.center();
    const double hw = fraction * g.half_width() + 1e-12 * g.h;
    return std::abs(c.x) <= hw && std::abs(c.y) <= hw;
  }
};

using GradientReference = std::function<Vec2(const Vec2&)>;

/// Mean over the window of |grad phi_approx - grad phi_ref|^2 at the
/// Gauss points of the approximation's grid.
inline double corrector_error(const CorrectorSolution& approx, const GradientReference& ref,
                              const Window& window) {
  const auto& g = approx.grid();
  const auto grads = approx.gradients();
  double sum = 0.0, area = 0.0;
  const double w = 0.25 * g.h * g.h;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!window.contains_cell(g, i, j)) continue;
      for (int q = 0; q < 4; ++q) {
        const Vec2 d = grads[4 * g.cell_index(i, j) + q] - ref(gauss::point(g, i, j, q));
        sum += w * dot(d, d);
        area += w;
      }
    }
  if (area == 0.0) throw Error("corrector_error: window contains no cells");
  return sum / area;
}

/// Reference given as another solution on the same grid or an integer
/// refinement of it covering the same box.
inline double corrector_error(const CorrectorSolution& approx, const CorrectorSolution& reference,
                              const Window& window) {
  const auto& g = approx.grid();
  const auto& r = reference.grid();
  if (g == r) {
    const auto ga = approx.gradients();
    const auto gr = reference.gradients();
    double sum = 0.0, area = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        if (!window.contains_cell(g, i, j)) continue;
        for (int q = 0; q < 4; ++q) {
          const std::size_t s = 4 * static_cast<std::size_t>(g.cell_index(i, j)) + q;
          const Vec2 d = ga[s] - gr[s];
          sum += dot(d, d);
          area += 1.0;
        }
      }
    if (area == 0.0) throw Error("corrector_error: window contains no cells");
    return sum / area;
  }
  const double ratio = g.h / r.h;
  const long m = std::lround(ratio);
  const bool aligned = m >= 1 && std::abs(ratio - m) < 1e-9 * ratio &&
                       std::abs(g.x0 - r.x0) < 1e-9 * g.h && std::abs(g.y0 - r.y0) < 1e-9 * g.h &&
                       r.nx == m * g.nx && r.ny == m * g.ny;
  if (!aligned) throw Error("corrector_error: reference grid is not an integer refinement");
  const Q1Interpolant interp(r, reference.nodal(), false);
  return corrector_error(approx, [&](const Vec2& x) { return interp.gradient(x); }, window);
}

}  // namespace reghom
