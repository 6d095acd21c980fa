#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace otlab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTolGeom = 1e-9;   // absolute; domains are O(1)
inline constexpr double kTolInt = 1e-8;    // relative quadrature tolerance
inline constexpr double kAngleTol = 1e-9;  // radians

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define OTLAB_DEFINE_ERROR(NAME)                                   \
  struct NAME : Error {                                            \
    explicit NAME(const std::string& what = #NAME) : Error(what) {} \
  }

OTLAB_DEFINE_ERROR(DegenerateRegion);
OTLAB_DEFINE_ERROR(NotDualizable);
OTLAB_DEFINE_ERROR(NotAVertex);
OTLAB_DEFINE_ERROR(EllipseNonConvergence);
OTLAB_DEFINE_ERROR(QuadratureFailure);
OTLAB_DEFINE_ERROR(SamplingFailure);
OTLAB_DEFINE_ERROR(NonConvergence);
OTLAB_DEFINE_ERROR(SingularHessian);
OTLAB_DEFINE_ERROR(CenteringFailure);
OTLAB_DEFINE_ERROR(RadiusTooSmall);
OTLAB_DEFINE_ERROR(WindowTooNarrow);
OTLAB_DEFINE_ERROR(FitDomainError);
OTLAB_DEFINE_ERROR(Unsolvable);
OTLAB_DEFINE_ERROR(ConfigError);

#undef OTLAB_DEFINE_ERROR

// ---------------------------------------------------------------------------
// 2D linear algebra
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

inline Vec2 normalized(Vec2 a) {
  double n = norm(a);
  if (n <= 0.0) throw Error("normalized: zero vector");
  return a / n;
}

inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }  // +90 degrees (CCW)
inline double angle_of(Vec2 a) { return std::atan2(a.y, a.x); }
inline Vec2 unit_dir(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 diag(double l1, double l2) { return {l1, 0.0, 0.0, l2}; }
  static Mat2 rotation(double theta) {
    double co = std::cos(theta), si = std::sin(theta);
    return {co, -si, si, co};
  }

  Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d,
            c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }

  Mat2 transpose() const { return {a, c, b, d}; }
  double det() const { return a * d - b * c; }
  double trace() const { return a + d; }

  Mat2 inverse() const {
    double dt = det();
    if (std::abs(dt) < 1e-300) throw Error("Mat2::inverse: singular matrix");
    return {d / dt, -b / dt, -c / dt, a / dt};
  }

  bool symmetric(double tol = kTolGeom) const { return std::abs(b - c) <= tol; }
};

// Eigen-decomposition of a symmetric 2x2 matrix; lambda1 <= lambda2, with
// orthonormal eigenvectors v1, v2.
struct EigenSym2 {
  double lambda1 = 0.0, lambda2 = 0.0;
  Vec2 v1, v2;
};

inline EigenSym2 eigen_sym(const Mat2& m) {
  double sym = 0.5 * (m.b + m.c);  // symmetrize defensively
  double tr = m.a + m.d;
  double dt = m.a * m.d - sym * sym;
  double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - dt));
  EigenSym2 e;
  e.lambda1 = tr / 2.0 - disc;
  e.lambda2 = tr / 2.0 + disc;
  // Eigenvector for lambda2 (the larger): (m - lambda1 I) has rank 1 and its
  // columns span the lambda2 eigenspace.
  Vec2 c1{m.a - e.lambda1, sym};
  Vec2 c2{sym, m.d - e.lambda1};
  Vec2 v = (norm2(c1) >= norm2(c2)) ? c1 : c2;
  if (norm(v) <= 1e-300) v = {1.0, 0.0};  // multiple eigenvalue: any basis
  e.v2 = normalized(v);
  e.v1 = rot90(e.v2) * -1.0;  // right-handed orthonormal pair
  return e;
}

inline Mat2 sqrt_spd(const Mat2& m) {
  EigenSym2 e = eigen_sym(m);
  if (e.lambda1 <= 0.0) throw Error("sqrt_spd: matrix not positive definite");
  double s1 = std::sqrt(e.lambda1), s2 = std::sqrt(e.lambda2);
  // R diag(s) R^T with R = [v1 v2].
  return {s1 * e.v1.x * e.v1.x + s2 * e.v2.x * e.v2.x,
          s1 * e.v1.x * e.v1.y + s2 * e.v2.x * e.v2.y,
          s1 * e.v1.y * e.v1.x + s2 * e.v2.y * e.v2.x,
          s1 * e.v1.y * e.v1.y + s2 * e.v2.y * e.v2.y};
}

// ---------------------------------------------------------------------------
// Deterministic random numbers.
// std::mt19937_64 output is fully specified by the standard; we avoid the
// distribution adaptors (implementation-defined) and map words to doubles
// ourselves so byte-identical reproducibility holds across toolchains.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double range(double a, double b) { return a + (b - a) * unit(); }
  std::size_t index(std::size_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64 and any
    // bias is far below statistical use in this artifact.
    return static_cast<std::size_t>(gen_() % static_cast<std::uint64_t>(n));
  }
  std::uint64_t word() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Serialization helpers: 17 significant digits round-trips doubles exactly.
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline std::string fmt17(Vec2 v) { return fmt17(v.x) + " " + fmt17(v.y); }

}  // namespace otlab
