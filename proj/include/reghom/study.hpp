#pragma once

// Convergence sweeps, log-log slope fits, CSV and gnuplot output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "reghom/averaging.hpp"
#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"
#include "reghom/error.hpp"
#include "reghom/hmm.hpp"
#include "reghom/lattice.hpp"
#include "reghom/reference.hpp"

namespace reghom {

/// One sweep point. k = 0 marks the unregularized (naive) run. For hmm rows
/// R holds 1/H and n the fine cells per dimension.
struct StudyRecord {
  std::string field;
  std::string variant;
  double T = infinite_T;
  int k = 0;
  double R = 0.0;
  double L = 0.0;
  std::string p;
  int n = 0;
  double h = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  std::string error_def;
  double wall_time = 0.0;
  std::string status = "ok";
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // sqrt of the mean squared log residual
  int count = 0;
};

/// OLS of log(err) on log(x).
inline SlopeFit fit_slope(std::span<const double> x, std::span<const double> err) {
  if (x.size() != err.size()) throw Error("fit_slope: size mismatch");
  if (x.size() < 3) throw Error("fit_slope: need at least 3 points");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(err[i] > 0.0) || !std::isfinite(err[i]))
      throw Error("fit_slope: abscissae and errors must be positive and finite");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(err[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_slope: abscissae must not all coincide");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.count = n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

inline SlopeFit fit_slope(std::span<const StudyRecord> recs) {
  std::vector<double> x, e;
  for (const auto& r : recs) {
    if (r.status != "ok") continue;
    x.push_back(r.R);
    e.push_back(r.error);
  }
  return fit_slope(x, e);
}

/// Records of one curve with R in [rmin, rmax].
inline std::vector<StudyRecord> select_curve(std::span<const StudyRecord> recs,
                                             const std::string& field, const std::string& variant,
                                             int k, const std::string& error_def,
                                             double rmin = 0.0,
                                             double rmax = std::numeric_limits<double>::infinity()) {
  std::vector<StudyRecord> out;
  for (const auto& r : recs)
    if (r.field == field && r.variant == variant && r.k == k && r.error_def == error_def &&
        r.R >= rmin && r.R <= rmax)
      out.push_back(r);
  return out;
}

inline void sort_records(std::vector<StudyRecord>& recs) {
  std::stable_sort(recs.begin(), recs.end(), [](const StudyRecord& a, const StudyRecord& b) {
    return std::tie(a.field, a.variant, a.k, a.R, a.error_def) <
           std::tie(b.field, b.variant, b.k, b.R, b.error_def);
  });
}

namespace detail {

inline std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17) << v;
  return s.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline void write_csv(std::ostream& os, std::span<const StudyRecord> recs) {
  os << "field,variant,T,k,R,L,p,n,h,error,error_def,wall_time,status\n";
  for (const auto& r : recs) {
    os << detail::csv_field(r.field) << ',' << detail::csv_field(r.variant) << ','
       << detail::num(r.T) << ',' << r.k << ',' << detail::num(r.R) << ',' << detail::num(r.L)
       << ',' << r.p << ',' << r.n << ',' << detail::num(r.h) << ',' << detail::num(r.error)
       << ',' << detail::csv_field(r.error_def) << ',' << detail::num(r.wall_time) << ','
       << detail::csv_field(r.status) << '\n';
  }
}

/// One block per curve: a comment line, then "log10 R  log10 error" rows.
inline void write_gnuplot(std::ostream& os, std::span<const StudyRecord> recs) {
  std::map<std::tuple<std::string, std::string, int, std::string>, std::vector<const StudyRecord*>>
      curves;
  for (const auto& r : recs)
    if (r.status == "ok" && r.error > 0.0) curves[{r.field, r.variant, r.k, r.error_def}].push_back(&r);
  bool first = true;
  for (const auto& [key, pts] : curves) {
    if (!first) os << "\n\n";
    first = false;
    os << "# " << std::get<0>(key) << ' ' << std::get<1>(key) << " k=" << std::get<2>(key) << ' '
       << std::get<3>(key) << '\n';
    for (const auto* r : pts)
      os << detail::num(std::log10(r->R)) << ' ' << detail::num(std::log10(r->error)) << '\n';
  }
}

struct ApEstimate {
  double tensor = 0.0;     // |A_{T,k,R,L,p} - A_{T,kref,R,L,p}| max norm
  double corrector = 0.0;  // inner-window mean of |grad phi_{T,k} - grad phi_{T,kref}|^2, xi = e1
};

/// Self-estimator for fields without a computable reference.
inline ApEstimate ap_estimator(const CorrectorLadder& ladder, int k, int kref, double L,
                               const Filter& filter, double window_fraction = 1.0 / 6.0) {
  if (kref <= k) throw Error("ap_estimator: kref must exceed k");
  if (kref > ladder.kmax()) throw Error("ap_estimator: ladder too short for kref");
  ApEstimate out;
  const auto A = ladder.tensor(k, L, filter, TensorVariant::projected).a;
  const auto Aref = ladder.tensor(kref, L, filter, TensorVariant::projected).a;
  out.tensor = max_norm_distance(A, Aref);
  out.corrector = corrector_error(ladder.solution(k, 0, false), ladder.solution(kref, 0, false),
                                  Window::inner(window_fraction));
  return out;
}

inline ApEstimate ap_estimator(const CoefficientField& field, double R, int m, double T, int k,
                               int kref, double L, const Filter& filter, double rel_tol = 1e-11) {
  if (kref <= k) throw Error("ap_estimator: kref must exceed k");
  auto prob = std::make_shared<const CorrectorProblem>(
      StructuredGrid::box(R, static_cast<int>(std::lround(2.0 * R * m))), field, SolveOptions{rel_tol});
  return ap_estimator(CorrectorLadder(prob, T, kref), k, kref, L, filter);
}

struct SweepSpec {
  std::string preset;        // lattice|mat2|mat3|mat4|mat5|hmm
  std::optional<std::vector<double>> rlist;  // unset selects the preset default
  int kmax = 2;
  int kref = 3;
  int p = Filter::infinite;
  int m = 8;                  // fine cells per unit length
  double T_per_R = 0.01;      // continuum presets
  double L_per_R = 1.0 / 3.0;
  double window = 1.0 / 6.0;  // corrector error window fraction
  double rel_tol = 1e-11;
  LatticeConvention lattice;
  double hmm_eps = 1.0 / 16.0;
  int hmm_cells_per_eps = 8;
  std::string hmm_field = "mat2";
};

inline std::vector<double> default_rlist(const std::string& preset) {
  if (preset == "lattice") return {20, 40, 60, 80, 100};
  if (preset == "hmm") return {2, 4};
  if (preset == "mat2" || preset == "mat3" || preset == "mat4" || preset == "mat5")
    return {5, 10, 20, 30};
  throw Error("unknown preset '" + preset + "' (expected lattice|mat2|mat3|mat4|mat5|hmm)");
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs `body`, which fills `rows` for one R; on failure emits `fallback`
/// rows carrying the message.
template <class Body>
void guarded(std::vector<StudyRecord>& out, const std::vector<StudyRecord>& fallback, Body&& body) {
  const auto t0 = Clock::now();
  std::vector<StudyRecord> rows;
  try {
    body(rows);
  } catch (const std::exception& e) {
    rows = fallback;
    for (auto& r : rows) {
      r.status = std::string("error: ") + e.what();
      r.error = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const double dt = seconds_since(t0) / std::max<std::size_t>(1, rows.size());
  for (auto& r : rows) {
    r.wall_time = dt;
    out.push_back(std::move(r));
  }
}

inline void sweep_lattice(const SweepSpec& s, const std::vector<double>& rl,
                          std::vector<StudyRecord>& out) {
  const LatticeField f;
  const Filter filter = build_filter(s.p);
  const double ref = lattice_cell_value(f).a11;
  for (double R : rl)
    for (int k = 0; k <= s.kmax; ++k) {
      const int N = s.lattice.N(R);
      const double T = k == 0 ? infinite_T : s.lattice.T(R);
      StudyRecord base{"lattice", "prime", T, k, R, s.lattice.L(R), filter.label(), 2 * N, 1.0,
                       std::numeric_limits<double>::quiet_NaN(), "tensor_vs_cell"};
      guarded(out, {base}, [&](std::vector<StudyRecord>& rows) {
        const auto res = lattice_hom(f, N, T, std::max(k, 1), base.L, filter, s.rel_tol);
        StudyRecord r = base;
        r.error = max_norm_distance(res.a, Matrix2::identity(ref));
        rows.push_back(r);
      });
    }
}

inline void sweep_periodic(const SweepSpec& s, const std::vector<double>& rl,
                           std::vector<StudyRecord>& out) {
  const auto field = catalog(s.preset);
  const Filter filter = build_filter(s.p);
  const auto cell = periodic_cell(field, static_cast<int>(std::lround(field.period->x * s.m)), 1e-12);
  const auto ref = cell.gradient(0);
  for (double R : rl) {
    const int n = static_cast<int>(std::lround(2.0 * R * s.m));
    const double T = s.T_per_R * R, L = s.L_per_R * R;
    auto row = [&](const std::string& variant, int k, const std::string& def) {
      return StudyRecord{field.name, variant, k == 0 ? infinite_T : T, k, R, L, filter.label(), n,
                         1.0 / s.m, std::numeric_limits<double>::quiet_NaN(), def};
    };
    std::vector<StudyRecord> fallback;
    for (int k = 0; k <= s.kmax; ++k) {
      fallback.push_back(row("corrector", k, k == 0 ? "grad_sq_full_vs_periodic" : "grad_sq_inner_vs_periodic"));
      fallback.push_back(row("projected", k, "tensor_vs_cell"));
    }
    guarded(out, fallback, [&](std::vector<StudyRecord>& rows) {
      auto prob = std::make_shared<const CorrectorProblem>(StructuredGrid::box(R, n), field,
                                                           SolveOptions{s.rel_tol});
      const CorrectorLadder naive(prob, infinite_T, 1);
      const CorrectorLadder lad(prob, T, s.kmax);
      for (int k = 0; k <= s.kmax; ++k) {
        const CorrectorLadder& l = k == 0 ? naive : lad;
        const int kk = std::max(k, 1);
        const Window w = k == 0 ? Window::full() : Window::inner(s.window);
        StudyRecord rc = row("corrector", k, k == 0 ? "grad_sq_full_vs_periodic" : "grad_sq_inner_vs_periodic");
        rc.error = corrector_error(l.solution(kk, 0, false), ref, w);
        rows.push_back(rc);
        StudyRecord rt = row("projected", k, "tensor_vs_cell");
        rt.error = max_norm_distance(l.tensor(kk, L, filter, TensorVariant::projected).a, cell.a_hom);
        rows.push_back(rt);
      }
    });
  }
}

inline void sweep_almost_periodic(const SweepSpec& s, const std::vector<double>& rl,
                                  std::vector<StudyRecord>& out) {
  const auto field = catalog(s.preset);
  const Filter filter = build_filter(s.p);
  const std::string suffix = "_vs_k" + std::to_string(s.kref);
  for (double R : rl) {
    const int n = static_cast<int>(std::lround(2.0 * R * s.m));
    const double T = s.T_per_R * R, L = s.L_per_R * R;
    auto row = [&](const std::string& variant, int k, const std::string& def) {
      return StudyRecord{field.name, variant, T, k, R, L, filter.label(), n, 1.0 / s.m, std::numeric_limits<double>::quiet_NaN(), def};
    };
    std::vector<StudyRecord> fallback;
    for (int k = 1; k < s.kref; ++k) {
      fallback.push_back(row("projected", k, "tensor" + suffix));
      fallback.push_back(row("corrector", k, "grad_sq_inner" + suffix));
    }
    guarded(out, fallback, [&](std::vector<StudyRecord>& rows) {
      auto prob = std::make_shared<const CorrectorProblem>(StructuredGrid::box(R, n), field,
                                                           SolveOptions{s.rel_tol});
      const CorrectorLadder lad(prob, T, s.kref);
      for (int k = 1; k < s.kref; ++k) {
        const auto est = ap_estimator(lad, k, s.kref, L, filter, s.window);
        StudyRecord rt = row("projected", k, "tensor" + suffix);
        rt.error = est.tensor;
        rows.push_back(rt);
        StudyRecord rc = row("corrector", k, "grad_sq_inner" + suffix);
        rc.error = est.corrector;
        rows.push_back(rc);
      }
    });
  }
}

inline void sweep_hmm(const SweepSpec& s, const std::vector<double>& rl,
                      std::vector<StudyRecord>& out) {
  const auto field = catalog(s.hmm_field);
  for (double inv_H : rl)
    for (int k = 1; k <= s.kmax; ++k) {
      HmmParams prm;
      prm.eps = s.hmm_eps;
      prm.H = 1.0 / inv_H;
      prm.k = k;
      prm.h = s.hmm_eps / s.hmm_cells_per_eps;
      auto row = [&](const std::string& variant, const std::string& def) {
        return StudyRecord{"hmm:" + field.name, variant, prm.T_value(), k, inv_H, 0.5 * prm.H,
                      std::to_string(prm.p_value()), static_cast<int>(std::lround(1.0 / prm.h)), prm.h,
                           std::numeric_limits<double>::quiet_NaN(), def};
      };
      guarded(out, {row("h1", "h1_vs_uhom"), row("corrector", "l2_vs_grad_ueps")},
              [&](std::vector<StudyRecord>& rows) {
                const auto res = run_hmm(field, prm, "sin", true);
                StudyRecord a = row("h1", "h1_vs_uhom");
                a.error = res.h1_error;
                StudyRecord b = row("corrector", "l2_vs_grad_ueps");
                b.error = res.corrector_error;
                rows.push_back(a);
                rows.push_back(b);
              });
    }
}

}  // namespace detail

/// Runs a preset sweep. Single-run failures are kept as rows with a status
/// message; the output is sorted by (field, variant, k, R).
inline std::vector<StudyRecord> sweep(const SweepSpec& s) {
  const auto defaults = default_rlist(s.preset);
  const auto& rl = s.rlist ? *s.rlist : defaults;
  if (s.kmax < 1) throw Error("sweep: kmax must be at least 1");
  std::vector<StudyRecord> out;
  if (rl.empty()) return out;
  if (s.preset == "lattice")
    detail::sweep_lattice(s, rl, out);
  else if (s.preset == "mat2" || s.preset == "mat4")
    detail::sweep_periodic(s, rl, out);
  else if (s.preset == "mat3" || s.preset == "mat5")
    detail::sweep_almost_periodic(s, rl, out);
  else
    detail::sweep_hmm(s, rl, out);
  sort_records(out);
  return out;
}

}  // namespace reghom
