#pragma once

// Coarse P1 solver on the unit square with element tensors from local
// regularized cell problems, plus numerical correctors reconstructing grad u_eps.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "reghom/averaging.hpp"
#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"
#include "reghom/error.hpp"
#include "reghom/fem.hpp"
#include "reghom/grid.hpp"
#include "reghom/reference.hpp"
#include "reghom/sparse.hpp"

namespace reghom {

/// Structured right-triangle mesh of the unit square: each of the M x M
/// squares is split along its (0,0)-(1,1) diagonal.
struct CoarseMesh {
  int M = 2;
  double H = 0.5;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<Vec2> centroids;
  std::vector<bool> boundary_node;

  static CoarseMesh unit_square(int M) {
    if (M < 1) throw Error("CoarseMesh: need at least one square per dimension");
    CoarseMesh m;
    m.M = M;
    m.H = 1.0 / M;
    for (int j = 0; j <= M; ++j)
      for (int i = 0; i <= M; ++i) {
        m.nodes.push_back({i * m.H, j * m.H});
        m.boundary_node.push_back(i == 0 || j == 0 || i == M || j == M);
      }
    auto id = [M](int i, int j) { return j * (M + 1) + i; };
    for (int j = 0; j < M; ++j)
      for (int i = 0; i < M; ++i) {
        m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        m.elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    for (const auto& e : m.elements)
      m.centroids.push_back((1.0 / 3.0) * (m.nodes[e[0]] + m.nodes[e[1]] + m.nodes[e[2]]));
    return m;
  }

  static CoarseMesh with_size(double H) {
    const double inv = 1.0 / H;
    const int M = static_cast<int>(std::lround(inv));
    if (M < 1 || std::abs(inv - M) > 1e-9 * inv)
      throw Error("CoarseMesh: H must be 1/M for an integer M");
    return unit_square(M);
  }

  int element_count() const { return static_cast<int>(elements.size()); }
  double area() const { return 0.5 * H * H; }

  Box element_box(int e) const {
    Box b{1e300, 1e300, -1e300, -1e300};
    for (int v : elements[e]) {
      b.x0 = std::min(b.x0, nodes[v].x);
      b.y0 = std::min(b.y0, nodes[v].y);
      b.x1 = std::max(b.x1, nodes[v].x);
      b.y1 = std::max(b.y1, nodes[v].y);
    }
    return b;
  }

  /// Gradients of the three barycentric coordinates.
  std::array<Vec2, 3> shape_gradients(int e) const {
    const Vec2 p0 = nodes[elements[e][0]], p1 = nodes[elements[e][1]], p2 = nodes[elements[e][2]];
    const double det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    return {Vec2{(p1.y - p2.y) / det, (p2.x - p1.x) / det},
            Vec2{(p2.y - p0.y) / det, (p0.x - p2.x) / det},
            Vec2{(p0.y - p1.y) / det, (p1.x - p0.x) / det}};
  }

  int locate(const Vec2& x) const {
    const double u = std::clamp(x.x / H, 0.0, M - 1e-12);
    const double v = std::clamp(x.y / H, 0.0, M - 1e-12);
    const int i = static_cast<int>(u), j = static_cast<int>(v);
    const bool lower = (u - i) >= (v - j);
    return 2 * (j * M + i) + (lower ? 0 : 1);
  }

  double boundary_distance(const Vec2& x) const {
    return std::min({x.x, x.y, 1.0 - x.x, 1.0 - x.y});
  }
};

struct HmmParams {
  double eps = 1.0 / 16.0;
  double H = 0.25;
  double delta = 1.5;
  double T = 0.0;  // 0 selects H / eps
  int k = 1;
  int kprime = 0;  // 0 selects k
  double h = 0.0;  // 0 selects the automatic fine mesh size
  int p = -1;      // -1 selects 2k - 1

  double T_value() const { return T > 0.0 ? T : H / eps; }
  int kprime_value() const { return kprime > 0 ? kprime : k; }
  int p_value() const { return p >= 0 ? p : 2 * k - 1; }

  /// eps / 2^j with the smallest j such that h / eps <= (eps / H)^k, at
  /// least 4 and at most 16 cells per period.
  double h_value() const {
    if (h > 0.0) return h;
    const double target = std::pow(eps / H, k);
    int div = 4;
    while (1.0 / div > target && div < 16) div *= 2;
    return eps / div;
  }

  void validate() const {
    if (!(eps > 0.0 && H > 0.0 && delta >= 1.0)) throw Error("hmm: need eps > 0, H > 0, delta >= 1");
    const double hv = h_value();
    const double per_eps = eps / hv, per_unit = 1.0 / hv;
    if (std::abs(per_eps - std::lround(per_eps)) > 1e-9 * per_eps ||
        std::abs(per_unit - std::lround(per_unit)) > 1e-9 * per_unit)
      throw Error("hmm: h must divide both eps and the unit square");
    if (k < 1) throw Error("hmm: k must be at least 1");
  }
};

enum class Provenance { computed, computed_clipped, copied };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::computed:
      return "computed";
    case Provenance::computed_clipped:
      return "computed_clipped";
    default:
      return "copied";
  }
}

struct LocalTensorMap {
  std::vector<Matrix2> tensors;
  std::vector<Provenance> provenance;
  std::vector<int> donor;            // own index unless copied
  std::vector<double> clipped_mass;  // raw filter mass on the clipped window
  HmmParams params;
};

namespace detail {

/// Box snapped outward to the h-lattice and clipped to the unit square.
inline StructuredGrid patch_grid(const Box& b, double h) {
  const double x0 = std::max(0.0, std::floor(b.x0 / h + 1e-9) * h);
  const double y0 = std::max(0.0, std::floor(b.y0 / h + 1e-9) * h);
  const double x1 = std::min(1.0, std::ceil(b.x1 / h - 1e-9) * h);
  const double y1 = std::min(1.0, std::ceil(b.y1 / h - 1e-9) * h);
  const int nx = static_cast<int>(std::lround((x1 - x0) / h));
  const int ny = static_cast<int>(std::lround((y1 - y0) / h));
  if (nx < 2 || ny < 2) throw Error("hmm: patch is smaller than two fine cells");
  return StructuredGrid::rectangle(x0, y0, h, nx, ny);
}

inline bool inside_unit_square(const Box& b) {
  const double tol = 1e-12;
  return b.x0 >= -tol && b.y0 >= -tol && b.x1 <= 1.0 + tol && b.y1 <= 1.0 + tol;
}

}  // namespace detail

/// Projected filtered tensor of the regularized, extrapolated local problems
/// on `patch` (zero-order coefficient inv_zero), window of half-width `window`
/// centred at `center`. The filter scale is chosen so its support is the window.
inline Matrix2 local_tensor(const StructuredGrid& patch, const Vec2& center, double window,
                            const CoefficientField& field_eps, double inv_zero, int k,
                            const Filter& filter, double* clipped_mass = nullptr,
                            double rel_tol = 1e-10) {
  auto prob = std::make_shared<const CorrectorProblem>(patch, field_eps, SolveOptions{rel_tol});
  const CorrectorLadder ladder(prob, 1.0 / inv_zero, k);
  const double L = window / filter.support_radius();
  double raw = 0.0;
  const auto w = filter_weights(patch, filter, {center, L}, &raw);
  if (clipped_mass) *clipped_mass = raw;
  const auto g = ladder.gradients(k);
  return windowed_tensor(*prob->operators(false)->coefficients(), g, w, TensorVariant::projected);
}

/// Element tensors. Patches leaving the domain are replaced by the tensor of
/// the nearest element whose patch lies inside; with no such element the
/// clipped patch is used.
inline LocalTensorMap compute_local_tensors(const CoarseMesh& mesh, const CoefficientField& field,
                                            const HmmParams& prm) {
  prm.validate();
  const auto field_eps = field.scaled(prm.eps);
  const double h = prm.h_value();
  const double inv_zero = 1.0 / (prm.T_value() * prm.eps * prm.eps);
  const Filter filter = build_filter(prm.p_value());
  const int ne = mesh.element_count();
  LocalTensorMap map;
  map.params = prm;
  map.tensors.assign(ne, Matrix2{});
  map.provenance.assign(ne, Provenance::copied);
  map.donor.assign(ne, -1);
  map.clipped_mass.assign(ne, 0.0);
  const double hw = 0.5 * prm.delta * mesh.H;
  std::vector<bool> interior(ne);
  bool any_interior = false;
  for (int e = 0; e < ne; ++e) {
    const Vec2 c = mesh.centroids[e];
    interior[e] = detail::inside_unit_square({c.x - hw, c.y - hw, c.x + hw, c.y + hw});
    any_interior = any_interior || interior[e];
  }
  for (int e = 0; e < ne; ++e) {
    if (any_interior && !interior[e]) continue;
    const Vec2 c = mesh.centroids[e];
    const auto grid = detail::patch_grid({c.x - hw, c.y - hw, c.x + hw, c.y + hw}, h);
    map.tensors[e] = local_tensor(grid, c, 0.5 * mesh.H, field_eps, inv_zero, prm.k, filter,
                                  &map.clipped_mass[e]);
    map.provenance[e] = interior[e] ? Provenance::computed : Provenance::computed_clipped;
    map.donor[e] = e;
  }
  for (int e = 0; e < ne; ++e) {
    if (map.donor[e] >= 0) continue;
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int d = 0; d < ne; ++d) {
      if (map.provenance[d] == Provenance::copied) continue;
      const double dist = norm(mesh.centroids[d] - mesh.centroids[e]);
      if (dist < bd - 1e-12) bd = dist, best = d;
    }
    map.tensors[e] = map.tensors[best];
    map.clipped_mass[e] = map.clipped_mass[best];
    map.donor[e] = best;
  }
  return map;
}

struct CoarseSolution {
  std::shared_ptr<const CoarseMesh> mesh;
  std::vector<double> nodal;  // all nodes, zero on the boundary
  int iterations = 0;

  Vec2 gradient(int e) const {
    const auto g = mesh->shape_gradients(e);
    const auto& el = mesh->elements[e];
    return nodal[el[0]] * g[0] + nodal[el[1]] * g[1] + nodal[el[2]] * g[2];
  }

  double value(const Vec2& x) const {
    const int e = mesh->locate(x);
    const auto& el = mesh->elements[e];
    const Vec2 g = gradient(e);
    return nodal[el[0]] + dot(g, x - mesh->nodes[el[0]]);
  }
};

/// P1 Galerkin solve of -div(A_H grad u) = f with u = 0 on the boundary.
/// The load uses the three-edge-midpoint rule on each element.
inline CoarseSolution coarse_solve(std::shared_ptr<const CoarseMesh> mesh,
                                   const std::vector<Matrix2>& tensors,
                                   const std::function<double(const Vec2&)>& f,
                                   double rel_tol = 1e-12) {
  const int ne = mesh->element_count();
  if (static_cast<int>(tensors.size()) != ne) throw Error("coarse_solve: one tensor per element expected");
  std::vector<int> bad;
  bool symmetric = true;
  for (int e = 0; e < ne; ++e) {
    if (!(tensors[e].min_sym_eigenvalue() > 0.0)) bad.push_back(e);
    symmetric = symmetric && std::abs(tensors[e].a12 - tensors[e].a21) <= 1e-14 * tensors[e].max_abs();
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "coarse_solve: element tensors not elliptic on elements";
    for (int e : bad) msg << ' ' << e;
    throw Error(msg.str());
  }
  std::vector<int> dof(mesh->nodes.size(), -1);
  int n = 0;
  for (std::size_t v = 0; v < mesh->nodes.size(); ++v)
    if (!mesh->boundary_node[v]) dof[v] = n++;
  CoarseSolution sol{mesh, std::vector<double>(mesh->nodes.size(), 0.0), 0};
  if (n == 0) return sol;
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  std::vector<double> b(n, 0.0);
  auto add = [&](int r, int c, double v) {
    for (auto& [cc, vv] : rows[r])
      if (cc == c) {
        vv += v;
        return;
      }
    rows[r].push_back({c, v});
  };
  const double area = mesh->area();
  for (int e = 0; e < ne; ++e) {
    const auto g = mesh->shape_gradients(e);
    const auto& el = mesh->elements[e];
    const std::array<Vec2, 3> mids{0.5 * (mesh->nodes[el[0]] + mesh->nodes[el[1]]),
                                   0.5 * (mesh->nodes[el[1]] + mesh->nodes[el[2]]),
                                   0.5 * (mesh->nodes[el[2]] + mesh->nodes[el[0]])};
    const std::array<double, 3> fm{f(mids[0]), f(mids[1]), f(mids[2])};
    for (int a = 0; a < 3; ++a) {
      const int ra = dof[el[a]];
      if (ra < 0) continue;
      // midpoint m_i touches vertices i and i+1 with barycentric value 1/2
      const double load = area / 3.0 * (0.5 * fm[a] + 0.5 * fm[(a + 2) % 3]);
      b[ra] += load;
      for (int c = 0; c < 3; ++c) {
        const int rc = dof[el[c]];
        if (rc < 0) continue;
        add(ra, rc, area * dot(g[a], tensors[e] * g[c]));
      }
    }
  }
  CsrMatrix K;
  K.rows = n;
  K.row_ptr.assign(n + 1, 0);
  for (int r = 0; r < n; ++r) {
    std::sort(rows[r].begin(), rows[r].end());
    for (const auto& [c, v] : rows[r]) {
      K.col.push_back(c);
      K.val.push_back(v);
    }
    K.row_ptr[r + 1] = static_cast<int>(K.col.size());
  }
  std::vector<double> x(n, 0.0);
  const int max_iter = 100 * n + 1000;
  const SolveStats st = symmetric ? conjugate_gradient(K, b, x, rel_tol, max_iter)
                                  : bicgstab(K, b, x, rel_tol, max_iter);
  sol.iterations = st.iterations;
  for (std::size_t v = 0; v < mesh->nodes.size(); ++v)
    if (dof[v] >= 0) sol.nodal[v] = x[dof[v]];
  return sol;
}

struct ElementCorrector {
  StructuredGrid patch;
  std::vector<double> gamma;  // nodal values on the patch (zero on its boundary)
  Vec2 mean_gradient;         // M_{H,i}(grad u)
};

struct NumericalCorrectorSet {
  std::shared_ptr<const CoarseMesh> mesh;
  std::vector<ElementCorrector> elements;

  /// Reconstructed gradient C(x) on element e.
  Vec2 reconstruct(int e, const Vec2& x) const {
    const auto& c = elements[e];
    const Q1Interpolant interp(c.patch, c.gamma, false);
    return c.mean_gradient + interp.gradient(x);
  }
};

/// Patch of element e for its numerical corrector: the element's bounding box
/// dilated by (delta - 1) H on every side, clipped to the domain.
inline Box corrector_patch(const CoarseMesh& mesh, int e, double delta) {
  Box b = mesh.element_box(e);
  const double m = (delta - 1.0) * mesh.H;
  return {b.x0 - m, b.y0 - m, b.x1 + m, b.y1 + m};
}

inline NumericalCorrectorSet numerical_corrector(const CoarseSolution& coarse,
                                                 const CoefficientField& field,
                                                 const HmmParams& prm, double rel_tol = 1e-10) {
  prm.validate();
  const auto& mesh = *coarse.mesh;
  const auto field_eps = field.scaled(prm.eps);
  const double h = prm.h_value();
  const double T_eff = prm.T_value() * prm.eps * prm.eps;
  NumericalCorrectorSet set{coarse.mesh, {}};
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto grid = detail::patch_grid(corrector_patch(mesh, e, prm.delta), h);
    const Vec2 M = coarse.gradient(e);
    ElementCorrector ec{grid, std::vector<double>(grid.node_count(), 0.0), M};
    if (norm(M) > 0.0) {
      const CorrectorProblem prob(grid, field_eps, SolveOptions{rel_tol});
      const auto sol = prob.extrapolated(T_eff, prm.kprime_value(), M, false);
      ec.gamma = sol.nodal();
    }
    set.elements.push_back(std::move(ec));
  }
  return set;
}

/// Q1 solution of -div(A grad u) = f on the unit square, Dirichlet zero.
struct FineSolution {
  StructuredGrid grid;
  std::vector<double> nodal;

  Q1Interpolant interpolant() const { return Q1Interpolant(grid, nodal, false); }
};

inline FineSolution fine_solve(const CoefficientField& field, double h,
                               const std::function<double(const Vec2&)>& f,
                               double rel_tol = 1e-10) {
  const int n = static_cast<int>(std::lround(1.0 / h));
  const auto grid = StructuredGrid::rectangle(0.0, 0.0, 1.0 / n, n, n);
  const FemOperators ops(grid, field, Boundary::dirichlet0);
  SparseSystem sys = ops.system(0.0, Vec2{0.0, 0.0});
  sys.rhs = ops.source(f);
  const auto u = solve(sys, SolveOptions{rel_tol});
  return {grid, u.nodal()};
}

namespace detail {

/// Visits the points (weight, x, element) of the rule that splits every
/// coarse triangle into s^2 congruent subtriangles and applies the
/// three-point interior rule on each.
template <class F>
void coarse_quadrature(const CoarseMesh& mesh, int s, F&& visit) {
  static constexpr std::array<std::array<double, 3>, 3> bary{
      {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}}};
  const double w = mesh.area() / (s * s) / 3.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& el = mesh.elements[e];
    const Vec2 p0 = mesh.nodes[el[0]];
    const Vec2 d1 = (1.0 / s) * (mesh.nodes[el[1]] - p0);
    const Vec2 d2 = (1.0 / s) * (mesh.nodes[el[2]] - p0);
    for (int a = 0; a < s; ++a)
      for (int b = 0; a + b < s; ++b) {
        // upright subtriangle and, unless on the hypotenuse, the inverted one
        const std::array<Vec2, 3> up{p0 + a * d1 + b * d2, p0 + (a + 1) * d1 + b * d2,
                                     p0 + a * d1 + (b + 1) * d2};
        for (const auto& l : bary) visit(w, l[0] * up[0] + l[1] * up[1] + l[2] * up[2], e);
        if (a + b + 1 < s) {
          const std::array<Vec2, 3> dn{p0 + (a + 1) * d1 + b * d2, p0 + (a + 1) * d1 + (b + 1) * d2,
                                       p0 + a * d1 + (b + 1) * d2};
          for (const auto& l : bary) visit(w, l[0] * dn[0] + l[1] * dn[1] + l[2] * dn[2], e);
        }
      }
  }
}

inline int subdivisions(const CoarseMesh& mesh, double h) {
  return std::max(1, static_cast<int>(std::lround(mesh.H / h)));
}

}  // namespace detail

/// || u_H - u_ref ||_{H^1(D)} with u_ref a fine Q1 solution.
inline double h1_error(const CoarseSolution& coarse, const FineSolution& ref) {
  const auto interp = ref.interpolant();
  double s = 0.0;
  detail::coarse_quadrature(*coarse.mesh, detail::subdivisions(*coarse.mesh, ref.grid.h),
                            [&](double w, const Vec2& x, int e) {
                              const double dv = coarse.value(x) - interp.value(x);
                              const Vec2 dg = coarse.gradient(e) - interp.gradient(x);
                              s += w * (dv * dv + dot(dg, dg));
                            });
  return std::sqrt(s);
}

/// || grad u_ref - C ||_{L^2} over all elements, or only those whose
/// centroid lies farther than H from the boundary.
inline double corrector_l2_error(const NumericalCorrectorSet& set, const FineSolution& ref,
                                 bool interior_only = false) {
  const auto& mesh = *set.mesh;
  const auto interp = ref.interpolant();
  std::vector<Q1Interpolant> gam;
  gam.reserve(set.elements.size());
  for (const auto& c : set.elements) gam.emplace_back(c.patch, c.gamma, false);
  double s = 0.0;
  bool any = false;
  detail::coarse_quadrature(mesh, detail::subdivisions(mesh, ref.grid.h),
                            [&](double w, const Vec2& x, int e) {
                              if (interior_only && mesh.boundary_distance(mesh.centroids[e]) <= mesh.H)
                                return;
                              any = true;
                              const Vec2 C = set.elements[e].mean_gradient + gam[e].gradient(x);
                              const Vec2 d = interp.gradient(x) - C;
                              s += w * dot(d, d);
                            });
  if (!any) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(s);
}

inline std::function<double(const Vec2&)> hmm_source(const std::string& name) {
  if (name == "const") return [](const Vec2&) { return 1.0; };
  if (name == "sin")
    return [](const Vec2& x) { return std::sin(std::numbers::pi * x.x) * std::sin(std::numbers::pi * x.y); };
  throw Error("unknown source '" + name + "' (expected const|sin)");
}

struct HmmResult {
  HmmParams params;
  std::shared_ptr<const CoarseMesh> mesh;
  LocalTensorMap tensors;
  CoarseSolution coarse;
  NumericalCorrectorSet correctors;
  Matrix2 a_hom;
  bool has_reference = false;
  double h1_error = std::numeric_limits<double>::quiet_NaN();
  double corrector_error = std::numeric_limits<double>::quiet_NaN();
  double corrector_error_interior = std::numeric_limits<double>::quiet_NaN();
  double u_hom_h1_norm = std::numeric_limits<double>::quiet_NaN();
  double grad_u_eps_l2_norm = std::numeric_limits<double>::quiet_NaN();
};

/// Full pipeline. With `reference`, u_hom (constant cell tensor, fine Q1)
/// and u_eps (fine Q1 at h/2) are computed and the errors filled in.
inline HmmResult run_hmm(const CoefficientField& field, const HmmParams& prm,
                         const std::string& source, bool reference, int cell_n = 128) {
  prm.validate();
  HmmResult r;
  r.params = prm;
  r.mesh = std::make_shared<const CoarseMesh>(CoarseMesh::with_size(prm.H));
  const auto f = hmm_source(source);
  r.tensors = compute_local_tensors(*r.mesh, field, prm);
  r.coarse = coarse_solve(r.mesh, r.tensors.tensors, f);
  r.correctors = numerical_corrector(r.coarse, field, prm);
  if (!reference) return r;
  r.has_reference = true;
  const double h_ref = 0.5 * prm.h_value();
  r.a_hom = field.period ? periodic_cell(field, cell_n).a_hom
                         : throw Error("hmm reference needs a periodic field for u_hom");
  const auto u_hom = fine_solve(fields::constant(r.a_hom), h_ref, f);
  r.h1_error = h1_error(r.coarse, u_hom);
  const auto u_eps = fine_solve(field.scaled(prm.eps), h_ref, f);
  r.corrector_error = corrector_l2_error(r.correctors, u_eps, false);
  r.corrector_error_interior = corrector_l2_error(r.correctors, u_eps, true);
  return r;
}

}  // namespace reghom
