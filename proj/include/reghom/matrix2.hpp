#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace reghom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : y; }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

constexpr Vec2 unit_vector(int i) { return i == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0}; }

/// Dense 2x2 real matrix, row-major entries a11 a12 / a21 a22.
struct Matrix2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Matrix2 identity(double s = 1.0) { return {s, 0.0, 0.0, s}; }
  static constexpr Matrix2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
  constexpr bool operator==(const Matrix2&) const = default;

  constexpr double operator()(int i, int j) const {
    return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
  }
  constexpr double& at(int i, int j) {
    return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
  }

  constexpr Matrix2 transpose() const { return {a11, a21, a12, a22}; }
  constexpr Matrix2 symmetric_part() const {
    const double off = 0.5 * (a12 + a21);
    return {a11, off, off, a22};
  }
  constexpr double trace() const { return a11 + a22; }
  constexpr double det() const { return a11 * a22 - a12 * a21; }

  constexpr Vec2 operator*(const Vec2& v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
  constexpr Matrix2& operator+=(const Matrix2& o) {
    a11 += o.a11;
    a12 += o.a12;
    a21 += o.a21;
    a22 += o.a22;
    return *this;
  }
  constexpr Matrix2& operator-=(const Matrix2& o) {
    a11 -= o.a11;
    a12 -= o.a12;
    a21 -= o.a21;
    a22 -= o.a22;
    return *this;
  }
  constexpr Matrix2& operator*=(double s) {
    a11 *= s;
    a12 *= s;
    a21 *= s;
    a22 *= s;
    return *this;
  }

  bool is_finite() const {
    return std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a21) &&
           std::isfinite(a22);
  }

  /// Smallest eigenvalue of the symmetric part, i.e. min over unit xi of xi.A xi.
  double min_sym_eigenvalue() const {
    const Matrix2 s = symmetric_part();
    const double m = 0.5 * (s.a11 + s.a22);
    const double r = std::hypot(0.5 * (s.a11 - s.a22), s.a12);
    return m - r;
  }

  /// Spectral norm (largest singular value).
  double operator_norm() const {
    const double f = a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22;
    const double d = std::abs(det());
    const double disc = std::max(0.0, f * f - 4.0 * d * d);
    return std::sqrt(0.5 * (f + std::sqrt(disc)));
  }

  double max_abs() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
  }
};

constexpr Matrix2 operator+(Matrix2 a, const Matrix2& b) { return a += b; }
constexpr Matrix2 operator-(Matrix2 a, const Matrix2& b) { return a -= b; }
constexpr Matrix2 operator*(double s, Matrix2 a) { return a *= s; }
constexpr Matrix2 operator*(const Matrix2& a, const Matrix2& b) {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
          a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

/// Entrywise max-norm distance, the tensor error used throughout the studies.
inline double max_norm_distance(const Matrix2& a, const Matrix2& b) {
  return (a - b).max_abs();
}

inline std::ostream& operator<<(std::ostream& os, const Matrix2& m) {
  return os << "[[" << m.a11 << ", " << m.a12 << "], [" << m.a21 << ", " << m.a22 << "]]";
}

}  // namespace reghom
