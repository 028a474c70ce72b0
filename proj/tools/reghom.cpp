// Command-line front end: corrector, homogenize, reference, lattice, hmm, study.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reghom/averaging.hpp"
#include "reghom/coeffs.hpp"
#include "reghom/corrector.hpp"
#include "reghom/hmm.hpp"
#include "reghom/lattice.hpp"
#include "reghom/reference.hpp"
#include "reghom/study.hpp"

namespace {

using namespace reghom;

double parse_T(const std::string& s) {
  if (s == "inf" || s == "infinity") return infinite_T;
  std::size_t used = 0;
  const double T = std::stod(s, &used);
  if (used != s.size() || !(T > 0.0)) throw Error("T must be positive or 'inf'");
  return T;
}

Vec2 parse_xi(const std::string& s) {
  const auto c = s.find(',');
  if (c == std::string::npos) throw Error("xi must be given as 'x,y'");
  return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

std::ostream& pick(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error("cannot open '" + path + "' for writing");
  return file;
}

void print_tensor(std::ostream& os, const std::string& label, const Matrix2& a) {
  os << std::setprecision(12) << label << " = [[" << a.a11 << ", " << a.a12 << "], [" << a.a21
     << ", " << a.a22 << "]]\n";
}

struct CorrectorArgs {
  std::string field = "mat2", T = "inf", xi = "1,0", out;
  double R = 5.0, window = 1.0;
  int n = 80, k = 1;
  bool dual = false;
};

void run_corrector(const CorrectorArgs& a) {
  const auto field = catalog(a.field);
  const auto grid = StructuredGrid::box(a.R, a.n);
  const CorrectorProblem prob(grid, field);
  const double T = parse_T(a.T);
  const Vec2 xi = parse_xi(a.xi);
  const auto sol = std::isinf(T) ? prob.solve(T, xi, a.dual) : prob.extrapolated(T, a.k, xi, a.dual);
  const Window w = Window::inner(a.window);
  std::ofstream file;
  std::ostream& os = pick(a.out, file);
  os << std::setprecision(17);
  if (field.period) {
    const auto cell = periodic_cell(field.is_symmetric || !a.dual ? field : field.transposed(),
                                    static_cast<int>(std::lround(field.period->x / grid.h)));
    const auto g0 = cell.gradient(0), g1 = cell.gradient(1);
    const GradientReference ref = [&](const Vec2& x) { return xi.x * g0(x) + xi.y * g1(x); };
    os << "# error_vs_periodic " << corrector_error(sol, ref, w) << '\n';
  }
  const auto g = sol.gradients();
  double energy = 0.0, count = 0.0;
  os << "x,y,dphi_dx,dphi_dy\n";
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      Vec2 m{};
      for (int q = 0; q < 4; ++q) m += 0.25 * g[4 * grid.cell_index(i, j) + q];
      if (w.contains_cell(grid, i, j)) {
        for (int q = 0; q < 4; ++q) energy += dot(g[4 * grid.cell_index(i, j) + q], g[4 * grid.cell_index(i, j) + q]);
        count += 4.0;
      }
      const Vec2 c = grid.cell_center(i, j);
      os << c.x << ',' << c.y << ',' << m.x << ',' << m.y << '\n';
    }
  std::cerr << "window mean |grad phi|^2 = " << energy / count << ", iterations " << sol.iterations << '\n';
}

struct HomArgs {
  std::string field = "mat2", T = "0.2", p = "inf", variant = "projected", csv;
  double R = 20.0, L = 0.0;
  int n = 320, k = 1;
};

void run_homogenize(const HomArgs& a) {
  const auto field = catalog(a.field);
  const double T = parse_T(a.T);
  const double L = a.L > 0.0 ? a.L : a.R / 3.0;
  const Filter f = build_filter(parse_filter_order(a.p));
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = hom_tensor(field, T, a.k, a.R, a.n, L, f, parse_variant(a.variant));
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  print_tensor(std::cout, "A", t.a);
  std::cout << "min_sym_eigenvalue = " << t.min_sym_eigenvalue << "\nraw_filter_mass = " << t.raw_filter_mass
            << "\nmean_grad_e1 = (" << t.mean_gradient[0].x << ", " << t.mean_gradient[0].y << ")"
            << "\nmean_grad_e2 = (" << t.mean_gradient[1].x << ", " << t.mean_gradient[1].y << ")"
            << "\nh = " << t.params.h << "\nwall_time = " << dt << '\n';
  if (!a.csv.empty()) {
    const bool fresh = !std::ifstream(a.csv).good();
    std::ofstream os(a.csv, std::ios::app);
    if (!os) throw Error("cannot open '" + a.csv + "'");
    StudyRecord r{field.name, a.variant, T, a.k, a.R, L, f.label(), a.n, t.params.h,
                  std::numeric_limits<double>::quiet_NaN(), "none", dt};
    std::ostringstream buf;
    write_csv(buf, std::span<const StudyRecord>(&r, 1));
    const std::string text = buf.str();
    os << (fresh ? text : text.substr(text.find('\n') + 1));
  }
}

void run_reference(const std::string& name, int n) {
  const auto field = catalog(name);
  if (field.laminate) print_tensor(std::cout, "A_laminate", laminate_oracle(*field.laminate));
  const auto cell = periodic_cell(field, n);
  print_tensor(std::cout, "A_hom", cell.a_hom);
  for (int j = 0; j < 2; ++j) {
    const auto g = gradient_field(cell.correctors[j]);
    double s = 0.0;
    for (const auto& v : g) s += dot(v, v);
    std::cout << "corrector e" << j + 1 << ": mean |grad phi|^2 = " << s / static_cast<double>(g.size()) << '\n';
  }
  std::cout << "h = " << cell.h << "\niterations = " << cell.iterations << '\n';
}

struct LatticeArgs {
  double R = 20.0, L = 0.0;
  std::string T = "", p = "inf", pattern;
  int k = 1;
};

void run_lattice(const LatticeArgs& a) {
  const LatticeField f{a.pattern.empty() ? default_lattice_pattern() : load_lattice_pattern(a.pattern)};
  const LatticeConvention conv;
  const auto cell = lattice_cell_value(f);
  print_tensor(std::cout, "A_cell", cell);
  const double T = a.T.empty() ? conv.T(a.R) : parse_T(a.T);
  const double L = a.L > 0.0 ? a.L : conv.L(a.R);
  const auto res = lattice_hom(f, conv.N(a.R), T, a.k, L, build_filter(parse_filter_order(a.p)));
  print_tensor(std::cout, "A", res.a);
  std::cout << "box_half_width_sites = " << res.N << "\nT = " << T << "\nL_sites = " << L
            << "\nerror = " << max_norm_distance(res.a, Matrix2::identity(cell.a11))
            << "\niterations = " << res.iterations << '\n';
}

struct HmmArgs {
  std::string field = "mat2", T = "auto", h = "auto", f = "sin", out;
  double eps = 1.0 / 16.0, H = 0.25, delta = 1.5;
  int k = 1, kprime = 0;
  bool reference = false;
};

void run_hmm_cli(const HmmArgs& a) {
  HmmParams p;
  p.eps = a.eps;
  p.H = a.H;
  p.delta = a.delta;
  p.T = a.T == "auto" ? 0.0 : parse_T(a.T);
  p.h = a.h == "auto" ? 0.0 : std::stod(a.h);
  p.k = a.k;
  p.kprime = a.kprime;
  const auto res = run_hmm(catalog(a.field), p, a.f, a.reference);
  std::ofstream file;
  std::ostream& os = pick(a.out, file);
  os << std::setprecision(17);
  os << "# elements\nelement,cx,cy,provenance,donor,a11,a12,a21,a22\n";
  for (int e = 0; e < res.mesh->element_count(); ++e) {
    const auto& t = res.tensors.tensors[e];
    os << e << ',' << res.mesh->centroids[e].x << ',' << res.mesh->centroids[e].y << ','
       << to_string(res.tensors.provenance[e]) << ',' << res.tensors.donor[e] << ',' << t.a11 << ','
       << t.a12 << ',' << t.a21 << ',' << t.a22 << '\n';
  }
  os << "# nodes\nnode,x,y,u\n";
  for (std::size_t v = 0; v < res.mesh->nodes.size(); ++v)
    os << v << ',' << res.mesh->nodes[v].x << ',' << res.mesh->nodes[v].y << ',' << res.coarse.nodal[v] << '\n';
  if (res.has_reference)
    os << "# errors\nh1_error,corrector_error,corrector_error_interior\n"
       << res.h1_error << ',' << res.corrector_error << ',' << res.corrector_error_interior << '\n';
}

struct StudyArgs {
  std::string preset = "mat2", rlist, out, gnuplot, p = "inf";
  int kmax = 2, kref = 3;
  bool rlist_set = false;
};

void run_study(const StudyArgs& a) {
  SweepSpec s;
  s.preset = a.preset;
  s.kmax = a.kmax;
  s.kref = a.kref;
  s.p = parse_filter_order(a.p);
  if (a.rlist_set) s.rlist = parse_list(a.rlist);
  const auto recs = sweep(s);
  std::ofstream file;
  write_csv(pick(a.out, file), recs);
  if (!a.gnuplot.empty()) {
    std::ofstream g;
    write_gnuplot(pick(a.gnuplot, g), recs);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized homogenization: correctors, tensors, lattice, HMM and studies"};
  app.require_subcommand(1);

  CorrectorArgs ca;
  auto* corr = app.add_subcommand("corrector", "Regularized corrector on Q_R, gradients as CSV");
  corr->add_option("--field", ca.field, "catalog field")->capture_default_str();
  corr->add_option("--R", ca.R, "box half-width")->capture_default_str();
  corr->add_option("--n", ca.n, "cells per dimension")->capture_default_str();
  corr->add_option("--T", ca.T, "regularization T or inf")->capture_default_str();
  corr->add_option("--k", ca.k, "extrapolation level")->capture_default_str();
  corr->add_option("--xi", ca.xi, "direction 'x,y'")->capture_default_str();
  corr->add_flag("--dual", ca.dual, "solve with the transposed field");
  corr->add_option("--window", ca.window, "window fraction for the error norms")->capture_default_str();
  corr->add_option("--out", ca.out, "CSV file (default stdout)");

  HomArgs ha;
  auto* hom = app.add_subcommand("homogenize", "Filtered tensor A'_{T,k,R,L,p} or A_{T,k,R,L,p}");
  hom->add_option("--field", ha.field)->capture_default_str();
  hom->add_option("--R", ha.R)->capture_default_str();
  hom->add_option("--n", ha.n)->capture_default_str();
  hom->add_option("--T", ha.T)->capture_default_str();
  hom->add_option("--k", ha.k)->capture_default_str();
  hom->add_option("--L", ha.L, "filter scale (default R/3)");
  hom->add_option("--p", ha.p, "filter order 0..4 or inf")->capture_default_str();
  hom->add_option("--variant", ha.variant, "prime|projected")->capture_default_str();
  hom->add_option("--csv", ha.csv, "append a record to this CSV file");

  std::string ref_field = "mat2";
  int ref_n = 64;
  auto* ref = app.add_subcommand("reference", "Periodic cell solve");
  ref->add_option("--field", ref_field)->capture_default_str();
  ref->add_option("--n", ref_n, "cells per period")->capture_default_str();

  LatticeArgs la;
  auto* lat = app.add_subcommand("lattice", "Discrete lattice warm-up");
  lat->add_option("--R", la.R, "periods per box side")->capture_default_str();
  lat->add_option("--T", la.T, "T (default R/10) or inf");
  lat->add_option("--L", la.L, "filter scale in sites (default 4R/3)");
  lat->add_option("--k", la.k)->capture_default_str();
  lat->add_option("--p", la.p)->capture_default_str();
  lat->add_option("--pattern-file", la.pattern, "4x4 edge pattern file");

  HmmArgs ma;
  auto* hmm = app.add_subcommand("hmm", "Coarse solve with local tensors and numerical correctors");
  hmm->set_help_flag("--help", "Print this help message and exit");  // -h is taken by --h
  hmm->add_option("--field", ma.field)->capture_default_str();
  hmm->add_option("--eps", ma.eps)->capture_default_str();
  hmm->add_option("--H", ma.H)->capture_default_str();
  hmm->add_option("--delta", ma.delta)->capture_default_str();
  hmm->add_option("--T", ma.T, "auto or value")->capture_default_str();
  hmm->add_option("--k", ma.k)->capture_default_str();
  hmm->add_option("--kprime", ma.kprime, "corrector level (default k)");
  hmm->add_option("--h", ma.h, "auto or value")->capture_default_str();
  hmm->add_option("--f", ma.f, "const|sin")->capture_default_str();
  hmm->add_flag("--reference", ma.reference, "compute fine references and errors");
  hmm->add_option("--out", ma.out, "CSV file (default stdout)");

  StudyArgs sa;
  auto* st = app.add_subcommand("study", "Convergence sweep to CSV");
  st->add_option("--preset", sa.preset, "lattice|mat2|mat3|mat4|mat5|hmm")->capture_default_str();
  st->add_option("--kmax", sa.kmax)->capture_default_str();
  st->add_option("--kref", sa.kref)->capture_default_str();
  st->add_option("--p", sa.p)->capture_default_str();
  auto* rl = st->add_option("--rlist", sa.rlist, "comma-separated R values");
  st->add_option("--out", sa.out, "CSV file (default stdout)");
  st->add_option("--gnuplot-data", sa.gnuplot, "file for log10 R / log10 error blocks");

  CLI11_PARSE(app, argc, argv);
  sa.rlist_set = rl->count() > 0;

  try {
    if (*corr) run_corrector(ca);
    if (*hom) run_homogenize(ha);
    if (*ref) run_reference(ref_field, ref_n);
    if (*lat) run_lattice(la);
    if (*hmm) run_hmm_cli(ma);
    if (*st) run_study(sa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
