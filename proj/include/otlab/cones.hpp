#pragma once

// Exact algebra of homogeneous planar optimal transport between cones:
// four-case classification of sector pairs, construction of the quadratic
// solutions u(x) = (1/2)<Qx, x>, the one-dimensional ODE profile behind the
// separable solutions, and the exponent tables for degenerate and
// mixed-homogeneity regimes.

#include <optional>

#include "otlab/geometry.hpp"

namespace otlab {

// ------------------------------------------------------------------ types

struct ConePair {
  Sector source;  // C
  Sector target;  // C'

  ConePair(Sector c, Sector cp) : source(c), target(cp) {
    auto check = [](const Sector& s, const char* which) {
      if (s.span() <= kAngleTol || s.span() > kPi + kAngleTol)
        throw Error(std::string("ConePair: ") + which +
                    " span must lie in (0, pi]");
    };
    check(source, "source");
    check(target, "target");
  }
};

enum class ConeVerdict { HalfSpace, Acute, RightAngle, Obtuse, NoHomogeneousMap };

inline const char* to_string(ConeVerdict v) {
  switch (v) {
    case ConeVerdict::HalfSpace: return "HalfSpace";
    case ConeVerdict::Acute: return "Acute";
    case ConeVerdict::RightAngle: return "RightAngle";
    case ConeVerdict::Obtuse: return "Obtuse";
    case ConeVerdict::NoHomogeneousMap: return "NoHomogeneousMap";
  }
  return "?";
}

// u(x) = (1/2) <Qx, x> with symmetric positive-definite Q, det Q = 1; the
// gradient map x -> Qx carries the source cone onto the target cone.
struct QuadraticSolution {
  Mat2 Q;
};

struct Classification {
  ConeVerdict verdict = ConeVerdict::NoHomogeneousMap;
  int family_dimension = 0;  // 1 exactly for HalfSpace and RightAngle
  std::optional<QuadraticSolution> witness;
};

struct ExponentTable {
  double n = 2.0, m = 0.0, l = 0.0, k = 0.0;
  double alpha = 1.0;        // (n+l)/(n+k)
  double deg_u = 2.0;        // 1 + alpha
  double deg_v = 2.0;        // 1 + 1/alpha
  double beta_u = 0.5;       // 1/(1+alpha)
  double beta_v = 0.5;       // 1/(1+1/alpha)
  double beta_flat = 0.5;
  double beta_cone_u = 1.0;  // 1/(1+m/(m+k)); limit 1 when m = 0
  double beta_cone_v = 0.0;  // 1/(1+(m+k)/m); limit 0 when m = 0
  double gamma_vol = 1.0;    // (n-m)/2 + m/(1+m/(m+k))
  double chi_exponent = 2.0; // 2(n+l)/(1+(n+l)/(n+k)) = 2*kappa_star
  double kappa_star = 1.0;   // (n+k)(n+l)/((n+k)+(n+l))
};

// ------------------------------------------------------- angular set tests

namespace detail {

// closure(X) \ {0} strictly inside interior(Y): angular interval containment
// with clearance > tol, testing the three possible 2*pi alignments.
inline bool strictly_inside(const Sector& x, const Sector& y, double tol) {
  for (int s = -1; s <= 1; ++s) {
    double shift = 2.0 * kPi * s;
    if (x.lo + shift > y.lo + tol && x.hi + shift < y.hi - tol) return true;
  }
  return false;
}

inline bool sector_equal(const Sector& x, const Sector& y, double tol) {
  for (int s = -1; s <= 1; ++s) {
    double shift = 2.0 * kPi * s;
    if (std::abs(x.lo + shift - y.lo) <= tol &&
        std::abs(x.hi + shift - y.hi) <= tol)
      return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------- classify

// Ordered case tests. The containment cases additionally require both cones
// strict (salient): a nonsingular linear gradient map cannot open a salient
// cone onto a half-plane, so pairs mixing the two kinds admit no witness.
inline ConeVerdict classify_verdict(const ConePair& pair) {
  const Sector& c = pair.source;
  const Sector& cp = pair.target;
  const bool half_src = c.is_half_plane();
  const bool half_tgt = cp.is_half_plane();
  const bool strict_src = c.is_strict();
  const bool strict_tgt = cp.is_strict();

  // (1) Half-space case: both are half-planes and the defining linear
  // functions are oblique, l . l' > 0 on inward normals (= bisectors).
  if (half_src && half_tgt) {
    return dot(c.bisector(), cp.bisector()) > kAngleTol
               ? ConeVerdict::HalfSpace
               : ConeVerdict::NoHomogeneousMap;
  }

  if (strict_src) {
    Sector dual = dual_cone(c);
    // (2) Acute: closure(C') \ {0} inside int(C degrees).
    if (strict_tgt && detail::strictly_inside(cp, dual, kAngleTol))
      return ConeVerdict::Acute;
    // (3) Right angle: C' = C degrees.
    if (detail::sector_equal(cp, dual, kAngleTol))
      return ConeVerdict::RightAngle;
    // (4) Obtuse: closure(C degrees) \ {0} inside int(C').
    if (strict_tgt && detail::strictly_inside(dual, cp, kAngleTol))
      return ConeVerdict::Obtuse;
  }
  return ConeVerdict::NoHomogeneousMap;
}

// ---------------------------------------------------------- solve_quadratic

namespace detail {

inline Mat2 normalize_det1(Mat2 q) {
  double d = q.det();
  if (!(d > 0.0)) throw Unsolvable("quadratic witness is not positive-definite");
  double s = std::sqrt(d);
  return {q.a / s, q.b / s, q.c / s, q.d / s};
}

inline void require_spd(const Mat2& q) {
  // det = 1 by construction, so positive trace is equivalent to SPD.
  if (!(q.trace() > 0.0) || !(q.det() > 0.0))
    throw Unsolvable("quadratic witness is not positive-definite");
  if (std::abs(q.b - q.c) > 1e-12)
    throw Unsolvable("quadratic witness lost symmetry");
}

// Unique witness from the ray system Q e1 = a f1, Q e2 = b f2 with the
// symmetry constraint a<f1,e2> = b<e1,f2> and det normalization.
inline Mat2 solve_ray_system(Vec2 e1, Vec2 e2, Vec2 f1, Vec2 f2) {
  const double ce = cross(e1, e2), cf = cross(f1, f2);
  if (!(ce > kAngleTol) || !(cf > kAngleTol))
    throw Unsolvable("ray system degenerate: cone spans collapse");
  const double d1 = dot(f1, e2), d2 = dot(e1, f2);
  const double rho = d2 / d1;  // a/b
  if (!(rho > 0.0) || !std::isfinite(rho))
    throw Unsolvable("ray system degenerate: inconsistent ray pairing");
  const double ab = ce / cf;
  const double a = std::sqrt(ab * rho), b = std::sqrt(ab / rho);
  // Q [e1 e2] = [a f1, b f2]
  Mat2 e_inv = Mat2{e1.x, e2.x, e1.y, e2.y}.inverse();
  Mat2 img{a * f1.x, b * f2.x, a * f1.y, b * f2.y};
  return img * e_inv;
}

}  // namespace detail

inline QuadraticSolution solve_quadratic(const ConePair& pair,
                                         std::optional<double> lambda = {}) {
  const ConeVerdict verdict = classify_verdict(pair);
  if (verdict == ConeVerdict::NoHomogeneousMap)
    throw Unsolvable("no homogeneous quadratic maps this cone pair");

  const bool family =
      verdict == ConeVerdict::HalfSpace || verdict == ConeVerdict::RightAngle;
  if (family && !lambda)
    throw Error("solve_quadratic: this pair admits a one-parameter family; "
                "a parameter value is required");
  if (!family && lambda)
    throw Error("solve_quadratic: this pair has a unique solution; "
                "no parameter applies");
  if (lambda && !(*lambda > 0.0))
    throw Error("solve_quadratic: the family parameter must be > 0");

  const Sector& c = pair.source;
  const Sector& cp = pair.target;
  Mat2 q;

  switch (verdict) {
    case ConeVerdict::Acute:
    case ConeVerdict::Obtuse: {
      q = detail::solve_ray_system(c.ray_lo(), c.ray_hi(), cp.ray_lo(),
                                   cp.ray_hi());
      break;
    }
    case ConeVerdict::RightAngle: {
      // Images of the boundary rays are the dual rays; the symmetry
      // constraint is vacuous (both inner products vanish), so the scale
      // split a/b = lambda^2 is free and only ab is pinned by det = 1.
      Vec2 e1 = c.ray_lo(), e2 = c.ray_hi();
      Vec2 f1 = cp.ray_lo(), f2 = cp.ray_hi();
      const double ab = cross(e1, e2) / cross(f1, f2);
      const double a = *lambda * std::sqrt(ab), b = std::sqrt(ab) / *lambda;
      Mat2 e_inv = Mat2{e1.x, e2.x, e1.y, e2.y}.inverse();
      q = Mat2{a * f1.x, b * f2.x, a * f1.y, b * f2.y} * e_inv;
      break;
    }
    case ConeVerdict::HalfSpace: {
      // Rotate so the pair straddles the x-axis symmetrically: boundary
      // directions dir(-g) and dir(+g) with 2g the (oblique) angle between
      // the boundary lines. In that frame the family is
      //   p = a + q tan(g),  q = (1 + a^2) tan(2g) / (2a),  r = (1 + q^2)/p
      // with a = lambda; obliqueness keeps |2g| < pi/2.
      const double delta = std::remainder(cp.lo - c.lo, 2.0 * kPi);
      const double g = 0.5 * delta;
      const double phi = c.lo + g;  // frame rotation
      const double a = *lambda;
      const double qq = (1.0 + a * a) * std::tan(2.0 * g) / (2.0 * a);
      const double p = a + qq * std::tan(g);
      const double r = (1.0 + qq * qq) / p;
      Mat2 hat{p, qq, qq, r};
      Mat2 rot = Mat2::rotation(phi);
      q = rot * hat * Mat2::rotation(-phi);
      break;
    }
    case ConeVerdict::NoHomogeneousMap:
      throw Unsolvable("unreachable");
  }

  q = detail::normalize_det1(q);
  // Clean residual asymmetry from the frame arithmetic before the guard.
  double off = 0.5 * (q.b + q.c);
  q.b = off;
  q.c = off;
  q = detail::normalize_det1(q);
  detail::require_spd(q);
  return QuadraticSolution{q};
}

inline Classification classify(const ConePair& pair) {
  Classification result;
  result.verdict = classify_verdict(pair);
  result.family_dimension = (result.verdict == ConeVerdict::HalfSpace ||
                             result.verdict == ConeVerdict::RightAngle)
                                ? 1
                                : 0;
  if (result.verdict != ConeVerdict::NoHomogeneousMap) {
    result.witness = solve_quadratic(
        pair, result.family_dimension == 1 ? std::optional<double>(1.0)
                                           : std::nullopt);
  }
  return result;
}

// -------------------------------------------------------------- ODE profile

// The separable homogeneous solutions reduce to f'' = c / f^3 with
// f(t) = sqrt(A (t - t0)^2 + Cc) and c = A * Cc.
struct OdeProfile {
  double A = 1.0, t0 = 0.0, Cc = 1.0;
  double c = 1.0;                     // = A * Cc
  double analytic_residual = 0.0;     // max |f''_exact - c/f^3|
  double fd_residual = 0.0;           // max |f''_fd - c/f^3|

  double f(double t) const { return std::sqrt(A * (t - t0) * (t - t0) + Cc); }
  double fpp(double t) const {
    // direct second derivative, not symbolically reduced
    double ft = f(t);
    return A / ft - A * A * (t - t0) * (t - t0) / (ft * ft * ft);
  }
};

inline OdeProfile ode_profile(double A, double t0, double Cc,
                              double t_min = -2.0, double t_max = 2.0,
                              int samples = 401) {
  if (!(A > 0.0)) throw Error("ode_profile: A must be > 0");
  if (!(Cc > 0.0)) throw Error("ode_profile: C must be > 0");
  OdeProfile prof;
  prof.A = A;
  prof.t0 = t0;
  prof.Cc = Cc;
  prof.c = A * Cc;
  const double h = 1e-3;
  for (int i = 0; i < samples; ++i) {
    double t = t_min + (t_max - t_min) * i / (samples - 1);
    double ft = prof.f(t);
    double rhs = prof.c / (ft * ft * ft);
    prof.analytic_residual =
        std::max(prof.analytic_residual, std::abs(prof.fpp(t) - rhs));
    // five-point central second difference, O(h^4)
    double fd = (-prof.f(t - 2 * h) + 16.0 * prof.f(t - h) - 30.0 * ft +
                 16.0 * prof.f(t + h) - prof.f(t + 2 * h)) /
                (12.0 * h * h);
    prof.fd_residual = std::max(prof.fd_residual, std::abs(fd - rhs));
  }
  return prof;
}

// ---------------------------------------------------------------- exponents

inline ExponentTable exponents(double n, double m, double l, double k) {
  if (!(n >= 2.0)) throw Error("exponents: n must be >= 2");
  if (!(m >= 0.0) || !(m <= n)) throw Error("exponents: m must be in [0, n]");
  if (!(k >= 0.0)) throw Error("exponents: k must be >= 0");
  if (!(l >= 0.0)) throw Error("exponents: l must be >= 0");
  ExponentTable t;
  t.n = n;
  t.m = m;
  t.l = l;
  t.k = k;
  t.alpha = (n + l) / (n + k);
  t.deg_u = 1.0 + t.alpha;
  t.deg_v = 1.0 + 1.0 / t.alpha;
  t.beta_u = 1.0 / t.deg_u;
  t.beta_v = 1.0 / t.deg_v;
  t.beta_flat = 0.5;
  const double cone_ratio = (m > 0.0) ? m / (m + k) : 0.0;  // limit m -> 0
  t.beta_cone_u = 1.0 / (1.0 + cone_ratio);
  t.beta_cone_v = (m > 0.0) ? 1.0 / (1.0 + (m + k) / m) : 0.0;
  t.gamma_vol = 0.5 * (n - m) + m / (1.0 + cone_ratio);
  t.kappa_star = (n + k) * (n + l) / ((n + k) + (n + l));
  t.chi_exponent = 2.0 * (n + l) / (1.0 + (n + l) / (n + k));
  return t;
}

}  // namespace otlab
