#pragma once

// Edge-conductivity networks on Z^2: discrete correctors, extrapolation and
// filtered averages over edges.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "reghom/averaging.hpp"
#include "reghom/corrector.hpp"
#include "reghom/error.hpp"
#include "reghom/matrix2.hpp"
#include "reghom/sparse.hpp"

namespace reghom {

/// One 4 x 4 period: horizontal[y][x] = a(x, x+e1), vertical[y][x] = a(x, x+e2).
struct LatticePattern {
  std::array<std::array<double, 4>, 4> horizontal{};
  std::array<std::array<double, 4>, 4> vertical{};
};

/// Two-phase 1/100 pattern whose cell problem gives 26.240099009901 Id.
inline LatticePattern default_lattice_pattern() {
  return {{{{1, 100, 100, 1}, {100, 100, 1, 1}, {100, 1, 1, 100}, {1, 1, 100, 100}}},
          {{{1, 1, 100, 100}, {100, 1, 1, 100}, {100, 100, 1, 1}, {1, 100, 100, 1}}}};
}

inline constexpr double lattice_reference_value = 26.240099009901;

/// Two 4 x 4 integer blocks (horizontal edges, then vertical), rows listed
/// from y = 0, entries 1 or 100. Lines starting with '#' are ignored.
inline LatticePattern parse_lattice_pattern(std::istream& in) {
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto c = line.find('#'); c != std::string::npos) line.erase(c);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != tok.size()) throw Error("lattice pattern: non-integer token '" + tok + "'");
      if (v != 1 && v != 100) throw Error("lattice pattern: values must be 1 or 100, got " + tok);
      vals.push_back(v);
    }
  }
  if (vals.size() != 32)
    throw Error("lattice pattern: expected 32 values (two 4x4 blocks), got " +
                std::to_string(vals.size()));
  LatticePattern p;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      p.horizontal[y][x] = vals[4 * y + x];
      p.vertical[y][x] = vals[16 + 4 * y + x];
    }
  return p;
}

inline LatticePattern load_lattice_pattern(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lattice pattern file '" + path + "'");
  return parse_lattice_pattern(in);
}

struct LatticeField {
  LatticePattern pattern = default_lattice_pattern();

  static LatticeField uniform(double c) {
    LatticeField f;
    for (auto& row : f.pattern.horizontal) row.fill(c);
    for (auto& row : f.pattern.vertical) row.fill(c);
    return f;
  }

  /// a(x, x + e_dir).
  double a(int x, int y, int dir) const {
    const int i = ((x % 4) + 4) % 4, j = ((y % 4) + 4) % 4;
    return dir == 0 ? pattern.horizontal[j][i] : pattern.vertical[j][i];
  }

  double alpha() const {
    double m = 1e300;
    for (int d = 0; d < 2; ++d)
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) m = std::min(m, a(i, j, d));
    return m;
  }
  double beta() const {
    double m = 0.0;
    for (int d = 0; d < 2; ++d)
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) m = std::max(m, a(i, j, d));
    return m;
  }
};

/// Nodes (x, y) in [-N, N]^2 (box) or a period of 4M sites (torus).
class LatticeOperator {
 public:
  /// Dirichlet-zero box of half-width N sites.
  static LatticeOperator box(const LatticeField& f, int N) {
    if (N < 2) throw Error("lattice box: half-width must be at least 2 sites");
    return LatticeOperator(f, -N, 2 * N, false);
  }
  /// Torus of side 4M sites.
  static LatticeOperator torus(const LatticeField& f, int M = 1) {
    return LatticeOperator(f, 0, 4 * M, true);
  }

  int side() const { return S_; }
  int origin() const { return x0_; }
  bool periodic() const { return periodic_; }
  int free_count() const { return static_cast<int>(rep_.size()); }
  const LatticeField& field() const { return field_; }

  /// Unknown index of node (i, j) in local coordinates 0..S, or -1.
  int dof(int i, int j) const {
    if (periodic_) {
      i = ((i % S_) + S_) % S_;
      j = ((j % S_) + S_) % S_;
      return j * S_ + i;
    }
    if (i <= 0 || j <= 0 || i >= S_ || j >= S_) return -1;
    return (j - 1) * (S_ - 1) + (i - 1);
  }

  /// Conductivity of the edge from local node (i, j) in direction dir.
  double a(int i, int j, int dir) const { return field_.a(x0_ + i, x0_ + j, dir); }

  /// Graph Laplacian -div* A grad plus inv_T identity.
  CsrMatrix matrix(double inv_T) const {
    CsrMatrix m;
    m.rows = free_count();
    m.row_ptr.assign(m.rows + 1, 0);
    for (int r = 0; r < m.rows; ++r) {
      const int i = rep_[r][0], j = rep_[r][1];
      std::array<std::pair<int, double>, 5> e{};
      int c = 0;
      double diag = inv_T;
      const int nb[4][3] = {{i + 1, j, 0}, {i - 1, j, 0}, {i, j + 1, 1}, {i, j - 1, 1}};
      for (const auto& q : nb) {
        const int ei = std::min(i, q[0]), ej = std::min(j, q[1]);
        const double w = a(ei, ej, q[2]);
        diag += w;
        const int k = dof(q[0], q[1]);
        if (k >= 0) {
          bool merged = false;
          for (int t = 0; t < c; ++t)
            if (e[t].first == k) e[t].second -= w, merged = true;
          if (!merged) e[c++] = {k, -w};
        }
      }
      bool self = false;
      for (int t = 0; t < c; ++t)
        if (e[t].first == r) e[t].second += diag, self = true;
      if (!self) e[c++] = {r, diag};
      std::sort(e.begin(), e.begin() + c);
      for (int t = 0; t < c; ++t) {
        m.col.push_back(e[t].first);
        m.val.push_back(e[t].second);
      }
      m.row_ptr[r + 1] = static_cast<int>(m.col.size());
    }
    return m;
  }

  /// Right-hand side div* (A xi) in weak form.
  std::vector<double> load(const Vec2& xi) const {
    std::vector<double> b(free_count(), 0.0);
    for_each_edge([&](int i, int j, int dir, int from, int to) {
      const double flux = a(i, j, dir) * xi[dir];
      if (from >= 0) b[from] += flux;
      if (to >= 0) b[to] -= flux;
    });
    return b;
  }

  /// Visits every edge once as (i, j, dir, dof of tail, dof of head).
  template <class F>
  void for_each_edge(F&& f) const {
    const int top = periodic_ ? S_ - 1 : S_;
    for (int j = 0; j <= top; ++j)
      for (int i = 0; i <= top; ++i) {
        if (i < S_) f(i, j, 0, dof(i, j), dof(i + 1, j));
        if (j < S_) f(i, j, 1, dof(i, j), dof(i, j + 1));
      }
  }

  /// Values at all (S+1)^2 local nodes.
  std::vector<double> to_nodal(const std::vector<double>& u) const {
    std::vector<double> out(static_cast<std::size_t>(S_ + 1) * (S_ + 1), 0.0);
    for (int j = 0; j <= S_; ++j)
      for (int i = 0; i <= S_; ++i) {
        const int k = dof(i, j);
        if (k >= 0) out[static_cast<std::size_t>(j) * (S_ + 1) + i] = u[k];
      }
    return out;
  }

 private:
  LatticeOperator(const LatticeField& f, int x0, int S, bool periodic)
      : field_(f), x0_(x0), S_(S), periodic_(periodic) {
    if (periodic) {
      for (int j = 0; j < S; ++j)
        for (int i = 0; i < S; ++i) rep_.push_back({i, j});
    } else {
      for (int j = 1; j < S; ++j)
        for (int i = 1; i < S; ++i) rep_.push_back({i, j});
    }
  }

  LatticeField field_;
  int x0_;
  int S_;
  bool periodic_;
  std::vector<std::array<int, 2>> rep_;
};

struct LatticeSolution {
  std::vector<double> u;  // free values
  double T = infinite_T;
  int k = 1;
  Vec2 xi{1.0, 0.0};
  int iterations = 0;
};

/// Level-one solves on the ladder T, ..., 2^{k-1} T, combined by the
/// Richardson rule.
inline LatticeSolution lattice_corrector(const LatticeOperator& op, double T, int k,
                                         const Vec2& xi, double rel_tol = 1e-13,
                                         std::vector<LatticeSolution>* ladder = nullptr) {
  if (k < 1) throw Error("lattice_corrector: level must be at least 1");
  if (std::isinf(T) && k > 1) throw Error("lattice_corrector: T = infinity admits no extrapolation");
  if (op.periodic() && std::isinf(T)) throw Error("lattice_corrector: torus needs T < infinity");
  const auto b = op.load(xi);
  std::vector<std::vector<double>> level;
  int its = 0;
  std::vector<double> x(b.size(), 0.0);
  for (int i = 0; i < k; ++i) {
    const double Ti = std::ldexp(T, i);
    const auto m = op.matrix(inverse_T(Ti));
    const auto st = conjugate_gradient(m, b, x, rel_tol, 50 * op.free_count() + 1000);
    its += st.iterations;
    level.push_back(x);
    if (ladder) ladder->push_back({x, Ti, 1, xi, st.iterations});
  }
  return {richardson_combine(std::move(level)), T, k, xi, its};
}

namespace detail {

/// sum over edges of w (xi'_d + grad_d u') a (xi_d + grad_d u), per direction
/// normalized by the edge weights of that direction.
template <class W>
Matrix2 lattice_energy(const LatticeOperator& op, const std::array<std::vector<double>, 2>& u,
                       W&& weight) {
  std::array<std::array<double, 2>, 2> num[2]{};
  double mass[2] = {0.0, 0.0};
  op.for_each_edge([&](int i, int j, int dir, int from, int to) {
    const double w = weight(i, j, dir);
    if (w == 0.0) return;
    const double ae = op.a(i, j, dir);
    std::array<double, 2> g{};
    for (int c = 0; c < 2; ++c) {
      const double ut = to >= 0 ? u[c][to] : 0.0;
      const double uf = from >= 0 ? u[c][from] : 0.0;
      g[c] = (c == dir ? 1.0 : 0.0) + ut - uf;
    }
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) num[dir][r][c] += w * g[r] * ae * g[c];
    mass[dir] += w;
  });
  Matrix2 out;
  for (int d = 0; d < 2; ++d) {
    if (!(mass[d] > 0.0)) throw Error("lattice average: window contains no edges");
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) out.at(r, c) += num[d][r][c] / mass[d];
  }
  return out;
}

}  // namespace detail

/// Exact periodic cell value of the homogenized tensor (zero-mean corrector
/// on the 4 x 4 torus, pinned node).
inline Matrix2 lattice_cell_value(const LatticeField& f, double rel_tol = 1e-14) {
  const auto op = LatticeOperator::torus(f, 1);
  std::array<std::vector<double>, 2> u;
  for (int c = 0; c < 2; ++c) {
    auto m = op.matrix(0.0);
    auto b = op.load(unit_vector(c));
    // Pin node 0.
    const double d0 = m.at(0, 0);
    for (int r = 0; r < m.rows; ++r)
      for (int p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p)
        if (r == 0 || m.col[p] == 0) m.val[p] = (r == 0 && m.col[p] == 0) ? d0 : 0.0;
    b[0] = 0.0;
    std::vector<double> x(b.size(), 0.0);
    conjugate_gradient(m, b, x, rel_tol, 10000);
    u[c] = x;
  }
  return detail::lattice_energy(op, u, [](int, int, int) { return 1.0; });
}

/// Maps a size R in periods to box, regularization and averaging scales in
/// site units. The defaults read R as periods per box side (4R sites), with
/// T = R/10 and L = R/3 periods.
struct LatticeConvention {
  double half_width_per_R = 2.0;
  double T_per_R = 0.1;
  double L_per_R = 4.0 / 3.0;

  int N(double R) const { return static_cast<int>(std::lround(half_width_per_R * R)); }
  double T(double R) const { return T_per_R * R; }
  double L(double R) const { return L_per_R * R; }
};

struct LatticeHomResult {
  Matrix2 a;
  double T = infinite_T;
  int k = 1;
  int N = 0;
  double L = 0.0;
  int p = 0;
  int iterations = 0;
};

/// A'_{T,k,N,L,p}: filtered edge average over a box of half-width N sites,
/// weights mu_L at edge midpoints.
inline LatticeHomResult lattice_hom(const LatticeField& f, int N, double T, int k, double L,
                                    const Filter& filter, double rel_tol = 1e-13) {
  if (L > N) throw Error("lattice_hom: L must not exceed the box half-width");
  if (!(L > 0.0)) throw Error("lattice_hom: L must be positive");
  const auto op = LatticeOperator::box(f, N);
  std::array<std::vector<double>, 2> u;
  LatticeHomResult res{{}, T, k, N, L, filter.order(), 0};
  for (int c = 0; c < 2; ++c) {
    auto s = lattice_corrector(op, T, k, unit_vector(c), rel_tol);
    res.iterations += s.iterations;
    u[c] = std::move(s.u);
  }
  res.a = detail::lattice_energy(op, u, [&](int i, int j, int dir) {
    const Vec2 mid{i - N + (dir == 0 ? 0.5 : 0.0), j - N + (dir == 1 ? 0.5 : 0.0)};
    return filter.scaled(mid, L);
  });
  return res;
}

}  // namespace reghom
