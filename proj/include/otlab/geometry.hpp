#pragma once

// Exact 2D convex geometry: polygons, half-plane clipping, moments, Hausdorff
// distance, sectors (planar cones) with duals, and minimum enclosing ellipses.

#include <cstddef>
#include <limits>
#include <optional>
#include <utility>

#include "otlab/common.hpp"

namespace otlab {

// {x : normal . x <= offset}
struct HalfPlane {
  Vec2 normal;
  double offset = 0.0;

  double signed_violation(Vec2 p) const { return dot(normal, p) - offset; }
  HalfPlane complement() const { return {-normal, -offset}; }

  // Half-plane through `a` containing points on the side `inward` points to.
  static HalfPlane through(Vec2 a, Vec2 inward_normal) {
    return {-inward_normal, -dot(inward_normal, a)};
  }
};

// Convex polygon, counter-clockwise vertex order, closed implicitly.
// Empty polygons are valid values (results of clipping).
class Polygon {
 public:
  Polygon() = default;

  // Deduplicates (threshold kTolGeom), normalizes to counter-clockwise.
  // Convexity invariant: every consecutive-edge cross product > -kTolGeom.
  static Polygon from(std::vector<Vec2> vs) {
    Polygon p;
    p.vs_ = dedup(std::move(vs));
    if (p.vs_.size() >= 3) {
      if (signed_area(p.vs_) < 0.0) std::reverse(p.vs_.begin(), p.vs_.end());
      for (std::size_t i = 0; i < p.vs_.size(); ++i) {
        Vec2 a = p.vs_[i];
        Vec2 b = p.vs_[(i + 1) % p.vs_.size()];
        Vec2 c = p.vs_[(i + 2) % p.vs_.size()];
        if (cross(b - a, c - b) <= -kTolGeom)
          throw Error("Polygon::from: vertex sequence is not convex");
      }
    }
    return p;
  }

  static Polygon rect(double x0, double y0, double x1, double y1) {
    return from({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
  }

  static Polygon regular(int n, double radius, double phase = 0.0,
                         Vec2 center = {0.0, 0.0}) {
    std::vector<Vec2> vs;
    vs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double t = phase + 2.0 * kPi * i / n;
      vs.push_back(center + radius * unit_dir(t));
    }
    return from(std::move(vs));
  }

  bool empty() const { return vs_.empty(); }
  std::size_t size() const { return vs_.size(); }
  Vec2 operator[](std::size_t i) const { return vs_[i]; }
  const std::vector<Vec2>& vertices() const { return vs_; }

  bool contains(Vec2 p, double tol = kTolGeom) const {
    if (vs_.empty()) return false;
    if (vs_.size() == 1) return dist(p, vs_[0]) <= tol;
    for (std::size_t i = 0; i < vs_.size(); ++i) {
      Vec2 a = vs_[i], b = vs_[(i + 1) % vs_.size()];
      if (cross(b - a, p - a) < -tol * std::max(1.0, norm(b - a))) return false;
    }
    return true;
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vs_.size(); ++i)
      for (std::size_t j = i + 1; j < vs_.size(); ++j)
        d = std::max(d, dist(vs_[i], vs_[j]));
    return d;
  }

  Polygon translated(Vec2 t) const {
    Polygon p = *this;
    for (Vec2& v : p.vs_) v += t;
    return p;
  }

  Polygon transformed(const Mat2& m) const {
    std::vector<Vec2> vs;
    vs.reserve(vs_.size());
    for (Vec2 v : vs_) vs.push_back(m * v);
    return from(std::move(vs));  // re-normalizes orientation
  }

  Polygon scaled_about(Vec2 c, double s) const {
    Polygon p = *this;
    for (Vec2& v : p.vs_) v = c + s * (v - c);
    if (s < 0.0) std::reverse(p.vs_.begin(), p.vs_.end());
    return p;
  }

  static double signed_area(const std::vector<Vec2>& vs) {
    double s = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i)
      s += cross(vs[i], vs[(i + 1) % vs.size()]);
    return 0.5 * s;
  }

 private:
  static std::vector<Vec2> dedup(std::vector<Vec2> vs) {
    std::vector<Vec2> out;
    for (Vec2 v : vs) {
      if (out.empty() || dist(out.back(), v) > kTolGeom) out.push_back(v);
    }
    while (out.size() > 1 && dist(out.front(), out.back()) <= kTolGeom)
      out.pop_back();
    return out;
  }

  std::vector<Vec2> vs_;
};

// Sutherland-Hodgman clip of a convex polygon by one half-plane.
inline Polygon clip(const Polygon& p, const HalfPlane& h) {
  constexpr double eps = 1e-12;
  const std::size_t n = p.size();
  if (n == 0) return Polygon{};
  std::vector<Vec2> out;
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 s = p[i];
    Vec2 e = p[(i + 1) % n];
    double ds = h.signed_violation(s);
    double de = h.signed_violation(e);
    bool ins = ds <= eps;
    bool ine = de <= eps;
    if (ins) out.push_back(s);
    if (ins != ine) {
      double t = ds / (ds - de);
      t = std::clamp(t, 0.0, 1.0);
      out.push_back(s + t * (e - s));
    }
  }
  if (n == 1) {  // single point: keep iff inside
    return h.signed_violation(p[0]) <= eps ? p : Polygon{};
  }
  // Re-deduplicate via the normal constructor; clipping preserves convexity
  // and orientation, but may introduce coincident vertices.
  std::vector<Vec2> vs(out.begin(), out.end());
  Polygon q = Polygon::from(std::move(vs));
  if (q.size() < 3) return Polygon{};  // clipped to a sliver: treat as empty
  return q;
}

inline Polygon clip(const Polygon& p, const std::vector<HalfPlane>& hs) {
  Polygon q = p;
  for (const HalfPlane& h : hs) {
    q = clip(q, h);
    if (q.empty()) break;
  }
  return q;
}

struct AreaCentroid {
  double area = 0.0;
  Vec2 centroid;
};

inline AreaCentroid area_centroid(const Polygon& p) {
  if (p.size() < 3) throw DegenerateRegion("area_centroid: empty or degenerate polygon");
  double a = 0.0;
  Vec2 m{0.0, 0.0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 u = p[i], v = p[(i + 1) % p.size()];
    double c = cross(u, v);
    a += c;
    m += (u + v) * c;
  }
  a *= 0.5;
  if (a <= kTolGeom * kTolGeom)
    throw DegenerateRegion("area_centroid: area below tolerance");
  return {a, m / (6.0 * a)};
}

inline double area_or_zero(const Polygon& p) {
  if (p.size() < 3) return 0.0;
  return Polygon::signed_area(p.vertices());
}

// Distance from a point to a segment [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = norm2(ab);
  if (len2 <= 0.0) return dist(p, a);
  double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return dist(p, a + t * ab);
}

inline double point_polygon_distance(Vec2 p, const Polygon& q) {
  if (q.empty()) throw DegenerateRegion("point_polygon_distance: empty polygon");
  if (q.size() >= 3 && q.contains(p, 0.0)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q.size(); ++i)
    best = std::min(best, point_segment_distance(p, q[i], q[(i + 1) % q.size()]));
  return best;
}

// Hausdorff distance between convex polygons (as filled regions). For convex
// sets the directed distance sup_{x in P} d(x, Q) is attained at a vertex of
// P, so vertex-to-edge evaluation is exact.
inline double hausdorff_distance(const Polygon& p, const Polygon& q) {
  if (p.empty() || q.empty())
    throw DegenerateRegion("hausdorff_distance: empty polygon");
  double h = 0.0;
  for (Vec2 v : p.vertices()) h = std::max(h, point_polygon_distance(v, q));
  for (Vec2 v : q.vertices()) h = std::max(h, point_polygon_distance(v, p));
  return h;
}

// ---------------------------------------------------------------------------
// Sectors: planar cones with apex at the origin.
// Angles stored with lo normalized to (-pi, pi], hi = lo + span,
// span in [0, 2*pi]. Span 0 represents a ray (the dual of a half-plane);
// cone domains require span > 0.
// ---------------------------------------------------------------------------

struct Sector {
  double lo = 0.0;
  double hi = 0.0;

  static Sector of(double theta_lo, double theta_hi) {
    double span = theta_hi - theta_lo;
    if (span < -kAngleTol || span > 2.0 * kPi + kAngleTol)
      throw Error("Sector::of: span outside [0, 2*pi]");
    span = std::clamp(span, 0.0, 2.0 * kPi);
    double lo = std::remainder(theta_lo, 2.0 * kPi);  // (-pi, pi]
    if (lo <= -kPi) lo += 2.0 * kPi;
    return {lo, lo + span};
  }

  double span() const { return hi - lo; }
  double bisector_angle() const { return lo + 0.5 * span(); }
  Vec2 bisector() const { return unit_dir(bisector_angle()); }
  Vec2 ray_lo() const { return unit_dir(lo); }
  Vec2 ray_hi() const { return unit_dir(hi); }

  bool is_strict(double tol = kAngleTol) const { return span() < kPi - tol; }
  bool is_half_plane(double tol = kAngleTol) const {
    return std::abs(span() - kPi) <= tol;
  }

  // Angular membership of the direction theta in [lo, hi] modulo 2*pi.
  bool contains_angle(double theta, double tol = kAngleTol) const {
    double rel = std::fmod(theta - lo, 2.0 * kPi);
    if (rel < 0.0) rel += 2.0 * kPi;
    if (rel <= span() + tol) return true;
    return rel >= 2.0 * kPi - tol;  // wrapped onto the lo ray
  }

  bool contains_dir(Vec2 d, double tol = kAngleTol) const {
    return contains_angle(angle_of(d), tol);
  }

  Sector rotated(double phi) const { return Sector::of(lo + phi, hi + phi); }
};

// Dual cone C° = {y : <x, y> >= 0 for all x in C}; spans must be <= pi.
inline Sector dual_cone(const Sector& s) {
  if (s.span() > kPi + kAngleTol)
    throw NotDualizable("dual_cone: span exceeds pi");
  return Sector::of(s.hi - kPi / 2.0, s.lo + kPi / 2.0);
}

inline Sector tangent_cone(const Polygon& p, std::size_t vertex_index) {
  if (vertex_index >= p.size())
    throw NotAVertex("tangent_cone: index out of range");
  if (p.size() < 3) throw DegenerateRegion("tangent_cone: degenerate polygon");
  Vec2 v = p[vertex_index];
  Vec2 next = p[(vertex_index + 1) % p.size()];
  Vec2 prev = p[(vertex_index + p.size() - 1) % p.size()];
  double a_out = angle_of(next - v);
  double a_in = angle_of(prev - v);
  double span = std::fmod(a_in - a_out, 2.0 * kPi);
  if (span < 0.0) span += 2.0 * kPi;
  return Sector::of(a_out, a_out + span);
}

// Convex polygonal truncation of a sector: apex, then the radius-R arc sampled
// finely enough that the polygon is a good inner approximation of the cone.
inline Polygon sector_polygon(const Sector& s, double radius, int arc_points = 33) {
  if (s.span() <= kAngleTol)
    throw DegenerateRegion("sector_polygon: zero span");
  std::vector<Vec2> vs;
  if (s.span() < 2.0 * kPi - kAngleTol) vs.push_back({0.0, 0.0});
  int n = std::max(arc_points, 2);
  for (int i = 0; i < n; ++i) {
    double t = s.lo + s.span() * i / (n - 1);
    vs.push_back(radius * unit_dir(t));
  }
  return Polygon::from(std::move(vs));
}

// ---------------------------------------------------------------------------
// Ellipses: {x : (x - c)^T M (x - c) <= 1} with M symmetric positive-definite.
// ---------------------------------------------------------------------------

struct Ellipse {
  Vec2 center;
  Mat2 M = Mat2::identity();

  struct Axes {
    double major = 0.0;
    double minor = 0.0;
    Vec2 major_dir;
    Vec2 minor_dir;
  };

  Axes axes() const {
    EigenSym2 e = eigen_sym(M);
    if (e.lambda1 <= 0.0) throw Error("Ellipse::axes: shape not positive definite");
    Axes a;
    a.major = 1.0 / std::sqrt(e.lambda1);
    a.minor = 1.0 / std::sqrt(e.lambda2);
    a.major_dir = e.v1;
    a.minor_dir = e.v2;
    return a;
  }

  double eccentricity() const {
    Axes a = axes();
    return a.major / a.minor;
  }

  double area() const {
    double dt = M.det();
    if (dt <= 0.0) throw Error("Ellipse::area: shape not positive definite");
    return kPi / std::sqrt(dt);
  }

  bool contains(Vec2 p, double inflate = 0.0) const {
    Vec2 r = p - center;
    double q = r.x * (M.a * r.x + M.b * r.y) + r.y * (M.c * r.x + M.d * r.y);
    double f = 1.0 + inflate;
    return q <= f * f;
  }
};

// Minimum-area enclosing (Loewner) ellipse of the polygon's vertices via
// Khachiyan's barycentric coordinate-descent on the lifted points (x, y, 1).
inline Ellipse lowner_ellipse(const Polygon& p, double eps = 1e-7,
                              int max_iter = 200000) {
  const std::vector<Vec2>& pts = p.vertices();
  const std::size_t n = pts.size();
  if (n < 3) throw DegenerateRegion("lowner_ellipse: need at least 3 vertices");

  std::vector<double> u(n, 1.0 / static_cast<double>(n));
  std::vector<double> d(n, 0.0);
  const double dim = 3.0;  // lifted dimension
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    // M = sum u_i q_i q_i^T for q_i = (x_i, y_i, 1): 3x3 symmetric.
    double m00 = 0, m01 = 0, m02 = 0, m11 = 0, m12 = 0, m22 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = u[i], x = pts[i].x, y = pts[i].y;
      m00 += w * x * x;
      m01 += w * x * y;
      m02 += w * x;
      m11 += w * y * y;
      m12 += w * y;
      m22 += w;
    }
    // Closed-form inverse of the symmetric 3x3 via adjugate.
    double c00 = m11 * m22 - m12 * m12;
    double c01 = m02 * m12 - m01 * m22;
    double c02 = m01 * m12 - m02 * m11;
    double c11 = m00 * m22 - m02 * m02;
    double c12 = m01 * m02 - m00 * m12;
    double c22 = m00 * m11 - m01 * m01;
    double det3 = m00 * c00 + m01 * c01 + m02 * c02;
    if (!(std::abs(det3) > 1e-300))
      throw EllipseNonConvergence("lowner_ellipse: singular moment matrix");
    double kplus = -std::numeric_limits<double>::infinity();
    double kminus = std::numeric_limits<double>::infinity();
    std::size_t iplus = 0, iminus = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = pts[i].x, y = pts[i].y;
      double v = x * (c00 * x + c01 * y + c02) + y * (c01 * x + c11 * y + c12) +
                 (c02 * x + c12 * y + c22);
      d[i] = v / det3;
      if (d[i] > kplus) {
        kplus = d[i];
        iplus = i;
      }
      if (u[i] > 1e-12 && d[i] < kminus) {
        kminus = d[i];
        iminus = i;
      }
    }
    if (kplus <= dim * (1.0 + eps) && kminus >= dim * (1.0 - eps)) {
      converged = true;
      break;
    }
    // Wolfe-Atwood rule: regular Frank-Wolfe step toward the worst outlier,
    // or an away/drop step from an over-weighted support point, whichever
    // violates optimality more. Away steps restore linear convergence.
    std::size_t i;
    double lam;
    if (kplus - dim >= dim - kminus) {
      i = iplus;
      lam = (kplus - dim) / (dim * (kplus - 1.0));
    } else {
      i = iminus;
      double lam_star = (kminus - 1.0 < 1e-12)
                            ? -std::numeric_limits<double>::infinity()
                            : (kminus - dim) / (dim * (kminus - 1.0));
      double lam_drop = -u[i] / std::max(1.0 - u[i], 1e-15);
      lam = std::max(lam_star, lam_drop);
    }
    for (std::size_t j = 0; j < n; ++j) u[j] *= (1.0 - lam);
    u[i] += lam;
    u[i] = std::max(u[i], 0.0);
  }
  if (!converged)
    throw EllipseNonConvergence("lowner_ellipse: Khachiyan iteration cap hit");

  Vec2 c{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) c += u[i] * pts[i];
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 r = pts[i] - c;
    sxx += u[i] * r.x * r.x;
    sxy += u[i] * r.x * r.y;
    syy += u[i] * r.y * r.y;
  }
  Mat2 sinv = Mat2{sxx, sxy, sxy, syy}.inverse();
  // The optimal ellipse is {r^T S^{-1} r <= 2}; at the (1+eps) stopping point
  // a support vertex may overshoot 2 by O(eps). Rescale to the farthest
  // vertex so containment holds exactly, at an O(eps) cost in area.
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 r = pts[i] - c;
    double q = r.x * (sinv.a * r.x + sinv.b * r.y) +
               r.y * (sinv.c * r.x + sinv.d * r.y);
    scale = std::max(scale, q);
  }
  if (scale <= 0.0)
    throw EllipseNonConvergence("lowner_ellipse: degenerate support");
  Ellipse e;
  e.center = c;
  e.M = sinv * (1.0 / scale);
  return e;
}

}  // namespace otlab
