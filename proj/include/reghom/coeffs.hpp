#pragma once

// Coefficient fields A : R^2 -> 2x2 matrices and the catalog of test fields.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "reghom/error.hpp"
#include "reghom/matrix2.hpp"

namespace reghom {

/// Axis-aligned rectangle [x0, x1] x [y0, y1].
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  static constexpr Box centered(double half_width) {
    return {-half_width, -half_width, half_width, half_width};
  }
  constexpr double width() const { return x1 - x0; }
  constexpr double height() const { return y1 - y0; }
  constexpr bool contains(const Vec2& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
};

/// 1-periodic positive profile a(t) of a laminate diag(a(x1), a(x1)).
struct LaminateProfile {
  std::function<double(double)> a;
  std::string description;
};

/// A heterogeneous conductivity field. Evaluation is a pure function and is
/// safe to call concurrently.
struct CoefficientField {
  std::string name;
  std::function<Matrix2(const Vec2&)> evaluate;
  bool is_symmetric = true;
  std::optional<Vec2> period;  // absent for almost-periodic fields
  double alpha_hint = 1.0;
  double beta_hint = 1.0;
  std::shared_ptr<const LaminateProfile> laminate;  // set for laminates only

  Matrix2 operator()(const Vec2& x) const { return evaluate(x); }

  /// Pointwise transpose A^*, the field of the dual corrector problem.
  CoefficientField transposed() const {
    CoefficientField t = *this;
    if (!is_symmetric) {
      t.name = name + "^T";
      t.evaluate = [f = evaluate](const Vec2& x) { return f(x).transpose(); };
    }
    return t;
  }

  /// The rescaled field x -> A(x / eps).
  CoefficientField scaled(double eps) const {
    CoefficientField s = *this;
    s.name = name + "@eps";
    s.evaluate = [f = evaluate, eps](const Vec2& x) { return f((1.0 / eps) * x); };
    if (period) s.period = eps * *period;
    return s;
  }
};

struct EllipticityBounds {
  double alpha_obs = 0.0;
  double beta_obs = 0.0;
};

/// Min symmetric-part eigenvalue and max operator norm over an n x n sample
/// grid covering `box` (endpoints included).
inline EllipticityBounds ellipticity_scan(const CoefficientField& field, const Box& box,
                                          int n) {
  if (n < 2) throw Error("ellipticity_scan: need at least 2 samples per dimension");
  EllipticityBounds b{std::numeric_limits<double>::infinity(), 0.0};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 x{box.x0 + box.width() * i / (n - 1), box.y0 + box.height() * j / (n - 1)};
      const Matrix2 a = field(x);
      if (!a.is_finite()) {
        std::ostringstream msg;
        msg << "ellipticity_scan: non-finite coefficient of field '" << field.name
            << "' at (" << x.x << ", " << x.y << ")";
        throw Error(msg.str());
      }
      b.alpha_obs = std::min(b.alpha_obs, a.min_sym_eigenvalue());
      b.beta_obs = std::max(b.beta_obs, a.operator_norm());
    }
  }
  return b;
}

namespace fields {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline CoefficientField constant(double c) {
  CoefficientField f;
  f.name = "constant:" + std::to_string(c);
  f.evaluate = [c](const Vec2&) { return Matrix2::identity(c); };
  f.period = Vec2{1.0, 1.0};
  f.alpha_hint = c;
  f.beta_hint = c;
  return f;
}

inline CoefficientField constant(const Matrix2& m) {
  CoefficientField f;
  f.name = "constant-matrix";
  f.evaluate = [m](const Vec2&) { return m; };
  f.is_symmetric = m.a12 == m.a21;
  f.period = Vec2{1.0, 1.0};
  f.alpha_hint = m.min_sym_eigenvalue();
  f.beta_hint = m.operator_norm();
  return f;
}

inline CoefficientField laminate(LaminateProfile profile, double alpha, double beta) {
  auto prof = std::make_shared<const LaminateProfile>(std::move(profile));
  CoefficientField f;
  f.name = "laminate:" + prof->description;
  f.evaluate = [prof](const Vec2& x) {
    const double a = prof->a(x.x);
    return Matrix2::identity(a);
  };
  f.period = Vec2{1.0, 1.0};
  f.alpha_hint = alpha;
  f.beta_hint = beta;
  f.laminate = std::move(prof);
  return f;
}

/// a(t) = mean + amp sin(2 pi t); requires |amp| < mean.
inline CoefficientField laminate_sine(double mean = 2.0, double amp = 1.0) {
  if (!(std::abs(amp) < mean)) throw Error("laminate_sine: profile must stay positive");
  std::ostringstream d;
  d << mean << "+" << amp << "sin";
  return laminate({[mean, amp](double t) { return mean + amp * std::sin(two_pi * t); }, d.str()},
                  mean - std::abs(amp), mean + std::abs(amp));
}

/// a = lo on [0, 1/2), hi on [1/2, 1), extended periodically.
inline CoefficientField laminate_two_phase(double lo = 1.0, double hi = 4.0) {
  std::ostringstream d;
  d << "twophase" << lo << "/" << hi;
  return laminate({[lo, hi](double t) { return t - std::floor(t) < 0.5 ? lo : hi; }, d.str()},
                  std::min(lo, hi), std::max(lo, hi));
}

namespace detail {
inline double mat2_scalar(const Vec2& x) {
  return (2.0 + 1.8 * std::sin(two_pi * x.x)) / (2.0 + 1.8 * std::cos(two_pi * x.y)) +
         (2.0 + std::sin(two_pi * x.y)) / (2.0 + 1.8 * std::cos(two_pi * x.x));
}
inline double mat3_a11(const Vec2& x) {
  const double s = x.x + x.y;
  return 4.0 + std::cos(two_pi * s) + std::cos(two_pi * std::numbers::sqrt2 * s);
}
inline double mat3_a22(const Vec2& x) {
  const double s1 = std::sin(two_pi * x.x);
  const double s2 = std::sin(two_pi * std::numbers::sqrt2 * x.x);
  return 6.0 + s1 * s1 + s2 * s2;
}
inline double skew_offdiag(const Vec2& x) {
  return std::sin(two_pi * x.x) * std::cos(two_pi * x.y);
}

inline void refine_hints(CoefficientField& f, const Box& box, int n) {
  const auto b = ellipticity_scan(f, box, n);
  f.alpha_hint = b.alpha_obs;
  f.beta_hint = b.beta_obs;
}
}  // namespace detail

/// Scalar periodic benchmark field (symmetric, period (1,1)).
inline CoefficientField mat2() {
  CoefficientField f;
  f.name = "mat2";
  f.evaluate = [](const Vec2& x) { return Matrix2::identity(detail::mat2_scalar(x)); };
  f.period = Vec2{1.0, 1.0};
  f.alpha_hint = 0.35;
  f.beta_hint = 20.5;
  detail::refine_hints(f, Box{0.0, 0.0, 1.0, 1.0}, 256);
  return f;
}

/// Diagonal almost-periodic field with frequencies 1 and sqrt(2) (symmetric).
inline CoefficientField mat3() {
  CoefficientField f;
  f.name = "mat3";
  f.evaluate = [](const Vec2& x) { return Matrix2::diag(detail::mat3_a11(x), detail::mat3_a22(x)); };
  f.alpha_hint = 2.0;
  f.beta_hint = 8.0;
  return f;
}

/// mat2 diagonal with the skew coupling +-2 + sin(2 pi x1) cos(2 pi x2).
inline CoefficientField mat4() {
  CoefficientField f;
  f.name = "mat4";
  f.evaluate = [](const Vec2& x) {
    const double d = detail::mat2_scalar(x);
    const double s = detail::skew_offdiag(x);
    return Matrix2{d, 2.0 + s, -2.0 + s, d};
  };
  f.is_symmetric = false;
  f.period = Vec2{1.0, 1.0};
  detail::refine_hints(f, Box{0.0, 0.0, 1.0, 1.0}, 256);
  return f;
}

/// mat3 diagonal with the same skew coupling as mat4 (non-symmetric, almost periodic).
inline CoefficientField mat5() {
  CoefficientField f;
  f.name = "mat5";
  f.evaluate = [](const Vec2& x) {
    const double s = detail::skew_offdiag(x);
    return Matrix2{detail::mat3_a11(x), 2.0 + s, -2.0 + s, detail::mat3_a22(x)};
  };
  f.is_symmetric = false;
  detail::refine_hints(f, Box{0.0, 0.0, 8.0, 8.0}, 512);
  return f;
}

}  // namespace fields

/// Resolves a catalog identifier: "mat2".."mat5", "constant:<c>",
/// "laminate:sin", "laminate:<mean>:<amp>", "laminate:twophase".
inline CoefficientField catalog(const std::string& spec) {
  if (spec == "mat2") return fields::mat2();
  if (spec == "mat3") return fields::mat3();
  if (spec == "mat4") return fields::mat4();
  if (spec == "mat5") return fields::mat5();

  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : spec.substr(colon + 1);
  try {
    if (head == "constant") {
      if (tail.empty()) throw Error("constant field needs a value, e.g. constant:3.0");
      std::size_t used = 0;
      const double c = std::stod(tail, &used);
      if (used != tail.size() || !(c > 0.0)) throw Error("bad constant value '" + tail + "'");
      auto f = fields::constant(c);
      f.name = spec;
      return f;
    }
    if (head == "laminate") {
      if (tail.empty() || tail == "sin") return fields::laminate_sine();
      if (tail == "twophase") return fields::laminate_two_phase();
      const auto c2 = tail.find(':');
      if (c2 != std::string::npos)
        return fields::laminate_sine(std::stod(tail.substr(0, c2)), std::stod(tail.substr(c2 + 1)));
    }
  } catch (const std::logic_error&) {
    throw Error("malformed field parameters in '" + spec + "'");
  }
  throw Error("unknown coefficient field '" + spec +
              "' (expected mat2|mat3|mat4|mat5|constant:<c>|laminate:sin|laminate:twophase|"
              "laminate:<mean>:<amp>)");
}

}  // namespace reghom
