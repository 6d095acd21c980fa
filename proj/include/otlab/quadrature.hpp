#pragma once

// Integration of densities over convex polygons and along segments.
//
// Dispatch, in order of preference:
//   * Uniform               -> constant * area (exact)
//   * MonomialYn            -> slab decomposition (exact for any real k >= 0:
//                              the cross-section width of a convex polygon is
//                              piecewise linear in x2, so each slab has a
//                              closed-form integral)
//   * radial forms          -> signed polar fan about the origin; the radial
//     (RadialHomog, Holder)    integral is closed-form, the angular one is
//                              piecewise analytic and integrates by adaptive
//                              Gauss-Legendre bisection split at profile
//                              joints and support rays
//   * everything else       -> fan triangulation with Duffy tensor rules,
//                              either fixed-order (polynomial-exact mode) or
//                              budgeted adaptive refinement graded toward
//                              degeneracy lines by pre-splitting
//
// Adaptive refinement that cannot meet its budget within max_depth signals
// QuadratureFailure.

#include <map>
#include <mutex>

#include "otlab/density.hpp"
#include "otlab/geometry.hpp"

namespace otlab {

struct Quadrature {
  enum class Mode { PolynomialExact, Adaptive };
  Mode mode = Mode::Adaptive;
  int order = 8;           // polynomial exactness degree (PolynomialExact)
  double tol = kTolInt;    // relative tolerance (Adaptive)
  int max_depth = 24;

  static Quadrature polynomial_exact(int order) {
    if (order < 1) throw Error("Quadrature: order must be >= 1");
    Quadrature q;
    q.mode = Mode::PolynomialExact;
    q.order = order;
    return q;
  }
  static Quadrature adaptive(double tol = kTolInt, int max_depth = 24) {
    Quadrature q;
    q.mode = Mode::Adaptive;
    q.tol = tol;
    q.max_depth = max_depth;
    return q;
  }
};

namespace detail {

struct GaussLegendre {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // summing to 1
};

// Nodes by Newton iteration on the Legendre recurrence (deterministic).
inline const GaussLegendre& gauss_legendre(int m) {
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;

  GaussLegendre gl;
  gl.nodes.resize(m);
  gl.weights.resize(m);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < m; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = m * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    gl.nodes[i] = 0.5 * (1.0 - x);
    gl.nodes[m - 1 - i] = 0.5 * (1.0 + x);
    gl.weights[i] = 0.5 * w;
    gl.weights[m - 1 - i] = 0.5 * w;
  }
  return cache.emplace(m, std::move(gl)).first->second;
}

// Two-level Gauss-Legendre bisection for piecewise-analytic 1D integrands.
// The error budget is absolute and halves with each split, so algebraic
// endpoint kinks (whose piece mass decays faster than the budget) terminate,
// unlike a per-piece relative criterion which is self-similar under
// bisection. Signed in (a, b). Throws QuadratureFailure past max_depth.
template <class F>
inline double gl_pair(const F& f, double a, double b, double* c8_out) {
  const GaussLegendre& g8 = gauss_legendre(8);
  const GaussLegendre& g16 = gauss_legendre(16);
  const double len = b - a;
  double c8 = 0.0, c16 = 0.0;
  for (int i = 0; i < 8; ++i) c8 += g8.weights[i] * f(a + g8.nodes[i] * len);
  for (int i = 0; i < 16; ++i) c16 += g16.weights[i] * f(a + g16.nodes[i] * len);
  *c8_out = c8 * len;
  return c16 * len;
}

template <class F>
inline double adaptive_gl_budget(const F& f, double a, double b, double budget,
                                 int depth, int max_depth) {
  double c8 = 0.0;
  double c16 = gl_pair(f, a, b, &c8);
  if (std::abs(c8 - c16) <= budget) return c16;
  if (depth >= max_depth)
    throw QuadratureFailure("adaptive 1D refinement hit max_depth");
  const double m = 0.5 * (a + b);
  return adaptive_gl_budget(f, a, m, 0.5 * budget, depth + 1, max_depth) +
         adaptive_gl_budget(f, m, b, 0.5 * budget, depth + 1, max_depth);
}

template <class F>
inline double adaptive_gl_1d(const F& f, double a, double b, double tol,
                             int /*depth*/ = 0, int max_depth = 30) {
  double c8 = 0.0;
  double seed = gl_pair(f, a, b, &c8);
  double budget = tol * std::max(std::abs(seed), std::abs(c8)) + 1e-300;
  if (std::abs(c8 - seed) <= budget) return seed;
  const double m = 0.5 * (a + b);
  return adaptive_gl_budget(f, a, m, 0.5 * budget, 1, max_depth) +
         adaptive_gl_budget(f, m, b, 0.5 * budget, 1, max_depth);
}

// Duffy tensor rule on triangle (a, b, c): exact for total degree <= 2m - 2.
inline double duffy_triangle(const Density& d, Vec2 a, Vec2 b, Vec2 c, int m) {
  const GaussLegendre& gl = gauss_legendre(m);
  const double two_area = std::abs(cross(b - a, c - a));
  if (two_area <= 1e-300) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    double u = gl.nodes[i];
    Vec2 base = a + u * (b - a);
    Vec2 dir = u * (c - b);
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += gl.weights[j] * d.eval(base + gl.nodes[j] * dir);
    sum += gl.weights[i] * u * row;
  }
  return two_area * sum;
}

inline double adaptive_triangle(const Density& d, Vec2 a, Vec2 b, Vec2 c,
                                double budget, int depth, int max_depth) {
  double coarse = duffy_triangle(d, a, b, c, 3);
  double fine = duffy_triangle(d, a, b, c, 6);
  if (std::abs(coarse - fine) <= budget) return fine;
  if (depth >= max_depth)
    throw QuadratureFailure("integrate: adaptive refinement hit max_depth");
  Vec2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  double quarter = 0.25 * budget;
  return adaptive_triangle(d, a, ab, ca, quarter, depth + 1, max_depth) +
         adaptive_triangle(d, ab, b, bc, quarter, depth + 1, max_depth) +
         adaptive_triangle(d, ca, bc, c, quarter, depth + 1, max_depth) +
         adaptive_triangle(d, ab, bc, ca, quarter, depth + 1, max_depth);
}

// Exact integral of c * (y)_+^k over the polygon: slab decomposition over
// sorted vertex heights; the cross-section width is linear on each slab.
inline double monomial_slab_integral(const Polygon& poly, double k, double c) {
  Polygon p = clip(poly, HalfPlane{{0.0, -1.0}, 0.0});  // keep y >= 0
  if (p.size() < 3) return 0.0;

  double yscale = 0.0;
  for (Vec2 v : p.vertices()) yscale = std::max(yscale, std::abs(v.y));
  const double eps_h = 1e-13 * (1.0 + yscale);

  std::vector<double> ys;
  ys.reserve(p.size());
  for (Vec2 v : p.vertices()) ys.push_back(std::max(v.y, 0.0));
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end(),
                       [eps_h](double a, double b) { return b - a < eps_h; }),
           ys.end());

  // Horizontal cross-section [min x, max x] at height y.
  auto width_at = [&p, eps_h](double y) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 s = p[i], e = p[(i + 1) % n];
      if ((s.y - y) * (e.y - y) > 0.0) continue;  // edge misses height y
      if (std::abs(e.y - s.y) < eps_h) {
        lo = std::min({lo, s.x, e.x});
        hi = std::max({hi, s.x, e.x});
        continue;
      }
      double x = s.x + (y - s.y) / (e.y - s.y) * (e.x - s.x);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return (hi > lo) ? hi - lo : 0.0;
  };

  // Primitive of t^e (zero at zero for e > -1).
  auto powint = [](double y, double e) {
    return std::pow(y, e + 1.0) / (e + 1.0);
  };

  double total = 0.0;
  for (std::size_t s = 0; s + 1 < ys.size(); ++s) {
    double y0 = ys[s], y1 = ys[s + 1];
    double h = y1 - y0;
    if (h <= eps_h) continue;
    double w0 = width_at(y0), w1 = width_at(y1);
    // w(y) = w0 + slope * (y - y0) on the slab; integrate y^k * w(y) exactly.
    double i_k = powint(y1, k) - powint(y0, k);
    double i_k1 = powint(y1, k + 1.0) - powint(y0, k + 1.0);
    double slope = (w1 - w0) / h;
    total += c * ((w0 - slope * y0) * i_k + slope * i_k1);
  }
  return total;
}

// Support constraints, flattened through Holder wrappers. Convex pieces
// become clipping half-planes; sectors wider than a half-plane stay as
// evaluation-side indicators.
struct SupportInfo {
  std::vector<HalfPlane> clips;
  std::vector<Sector> indicators;
};

inline SupportInfo collect_support(const Density& d) {
  SupportInfo s;
  const Density* cur = &d;
  while (cur != nullptr) {
    if (cur->support_half()) s.clips.push_back(*cur->support_half());
    if (cur->support_sector()) {
      const Sector& sec = *cur->support_sector();
      if (sec.span() <= kPi + kAngleTol) {
        s.clips.push_back({-1.0 * rot90(sec.ray_lo()), 0.0});
        s.clips.push_back({rot90(sec.ray_hi()), 0.0});
      } else {
        s.indicators.push_back(sec);
      }
    }
    cur = cur->kind() == DensityKind::HolderPerturbed ? cur->base() : nullptr;
  }
  return s;
}

// All density kinds decompose along rays from the origin as
//   f(r, theta) = A(theta) * (r^e + amp * r^{e+alpha}),
// except that the Holder clamp max(., 0) can bite for negative amplitudes at
// radius |amp|^{-1/alpha}; the caller checks that guard.
struct RadialForm {
  const Density* base;   // angular factor lives here
  double e = 0.0;        // base homogeneity
  double amp = 0.0;      // Holder amplitude (0 when absent)
  double alpha = 0.0;
};

inline RadialForm radial_form(const Density& d) {
  RadialForm rf;
  if (d.kind() == DensityKind::HolderPerturbed) {
    rf.base = d.base();
    rf.amp = d.holder_amplitude();
    rf.alpha = d.holder_alpha();
  } else {
    rf.base = &d;
  }
  rf.e = rf.base->homogeneity_degree().value_or(0.0);
  return rf;
}

inline double angular_factor(const Density& base, double theta) {
  switch (base.kind()) {
    case DensityKind::Uniform:
      return base.constant();
    case DensityKind::MonomialYn: {
      double s = std::sin(theta);
      return s > 0.0 ? base.constant() * std::pow(s, base.monomial_exponent())
                     : 0.0;
    }
    case DensityKind::RadialHomog:
      return base.constant() * base.profile_value(theta);
    default:
      return 0.0;  // not a radial form; unreachable via radial_polar_integral
  }
}

// Signed polar fan about the origin. Exact radially; the angular integrals
// are analytic between joints (profile sample angles, the monomial kinks at
// theta = 0 and pi, support-sector rays), so two-level Gauss-Legendre
// bisection converges fast regardless of where the origin sits.
inline double radial_polar_integral(const Density& d, const Polygon& p,
                                    const std::vector<Sector>& indicators,
                                    double tol) {
  const RadialForm rf = radial_form(d);
  const double ep2 = rf.e + 2.0;
  const double ea2 = rf.e + rf.alpha + 2.0;

  std::vector<double> joints;  // principal angles in (-pi, pi]
  auto add_joint = [&joints](double a) {
    joints.push_back(std::remainder(a, 2.0 * kPi));
  };
  if (rf.base->kind() == DensityKind::MonomialYn) {
    add_joint(0.0);
    add_joint(kPi);
  } else if (rf.base->kind() == DensityKind::RadialHomog) {
    const std::size_t n = rf.base->profile_size();
    for (std::size_t j = 0; j < n; ++j)
      add_joint(2.0 * kPi * static_cast<double>(j) / static_cast<double>(n));
  }
  for (const Sector& sec : indicators) {
    add_joint(sec.lo);
    add_joint(sec.hi);
  }

  double scale = 1.0;
  for (Vec2 v : p.vertices()) scale = std::max(scale, norm(v));

  double total = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = p[i], b = p[(i + 1) % n];
    Vec2 edge = b - a;
    double elen = norm(edge);
    if (elen <= 1e-300) continue;
    Vec2 nrm = rot90(edge) * (1.0 / elen);
    double h = dot(nrm, a);
    if (h < 0.0) {
      nrm = -1.0 * nrm;
      h = -h;
    }
    if (h <= 1e-14 * scale) continue;  // edge line through the origin

    const double ta = angle_of(a);
    const double dtheta = std::remainder(angle_of(b) - ta, 2.0 * kPi);
    if (std::abs(dtheta) < 1e-15) continue;

    // Cut parameters where a joint angle falls inside the swept arc.
    std::vector<double> cuts = {0.0, 1.0};
    for (double j : joints) {
      for (int m = -1; m <= 1; ++m) {
        double phi = j + 2.0 * kPi * m;
        double t = (phi - ta) / dtheta;
        if (t > 1e-12 && t < 1.0 - 1e-12) cuts.push_back(t);
      }
    }
    std::sort(cuts.begin(), cuts.end());

    auto wedge = [&](double theta) {
      double denom = dot(nrm, unit_dir(theta));
      double r = h / denom;
      double val = std::pow(r, ep2) / ep2;
      if (rf.amp != 0.0) val += rf.amp * std::pow(r, ea2) / ea2;
      return angular_factor(*rf.base, theta) * val;
    };

    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      double t0 = cuts[s], t1 = cuts[s + 1];
      if (t1 - t0 < 1e-14) continue;
      double th0 = ta + dtheta * t0, th1 = ta + dtheta * t1;
      double mid = 0.5 * (th0 + th1);
      bool inside = true;
      for (const Sector& sec : indicators)
        if (!sec.contains_angle(mid)) inside = false;
      if (!inside) continue;
      total += adaptive_gl_1d(wedge, th0, th1, tol);
    }
  }
  return std::max(total, 0.0);
}

// The Holder clamp max(., 0) is inactive on the polygon iff
// amp * r^alpha > -1 at the farthest vertex.
inline bool holder_clamp_inactive(const Density& d, const Polygon& p) {
  if (d.kind() != DensityKind::HolderPerturbed) return true;
  if (d.holder_amplitude() >= 0.0) return true;
  double rmax = 0.0;
  for (Vec2 v : p.vertices()) rmax = std::max(rmax, norm(v));
  return d.holder_amplitude() * std::pow(rmax, d.holder_alpha()) > -0.999;
}

}  // namespace detail

inline double integrate(const Density& d, const Polygon& p,
                        const Quadrature& q = Quadrature::adaptive()) {
  if (p.size() < 3) return 0.0;

  detail::SupportInfo sup = detail::collect_support(d);
  Polygon dom = sup.clips.empty() ? p : clip(p, sup.clips);
  if (dom.size() < 3) return 0.0;
  const bool wide_support = !sup.indicators.empty();

  if (q.mode == Quadrature::Mode::Adaptive) {
    switch (d.kind()) {
      case DensityKind::Uniform:
        if (!wide_support) return d.constant() * area_or_zero(dom);
        break;
      case DensityKind::MonomialYn:
        if (!wide_support)
          return detail::monomial_slab_integral(dom, d.monomial_exponent(),
                                                d.constant());
        break;
      default:
        break;
    }
    double tol_1d = std::max(1e-14, 1e-3 * q.tol);
    if (detail::holder_clamp_inactive(d, dom))
      return detail::radial_polar_integral(d, dom, sup.indicators, tol_1d);
    // else: clamp kicks in somewhere on dom; fall through to the 2D fan.
  }

  // Pre-split along the density's degeneracy line so refinement grades
  // toward it instead of straddling the kink.
  std::vector<Polygon> parts;
  if (d.degenerate_on_y_axis()) {
    Polygon upper = clip(dom, HalfPlane{{0.0, -1.0}, 0.0});
    if (upper.size() < 3) return 0.0;
    parts.push_back(upper);
  } else {
    parts.push_back(dom);
  }

  double total = 0.0;
  for (const Polygon& part : parts) {
    // Fan triangulation; pivot at the origin when the integrand has a radial
    // kink there and the origin lies inside (the Duffy map from the singular
    // vertex then absorbs the kink).
    std::vector<std::array<Vec2, 3>> tris;
    const std::size_t n = part.size();
    if (d.kind() == DensityKind::HolderPerturbed &&
        part.contains({0.0, 0.0}, 1e-12)) {
      for (std::size_t i = 0; i < n; ++i)
        tris.push_back({Vec2{0.0, 0.0}, part[i], part[(i + 1) % n]});
    } else {
      for (std::size_t i = 1; i + 1 < n; ++i)
        tris.push_back({part[0], part[i], part[i + 1]});
    }

    if (q.mode == Quadrature::Mode::PolynomialExact) {
      int m = std::max(2, (q.order + 3) / 2);  // 2m - 2 >= order
      for (auto& t : tris)
        total += detail::duffy_triangle(d, t[0], t[1], t[2], m);
      continue;
    }

    double scale = 0.0, total_area = 0.0;
    std::vector<double> coarse(tris.size());
    for (std::size_t i = 0; i < tris.size(); ++i) {
      coarse[i] =
          detail::duffy_triangle(d, tris[i][0], tris[i][1], tris[i][2], 6);
      scale += std::abs(coarse[i]);
      total_area +=
          0.5 * std::abs(cross(tris[i][1] - tris[i][0], tris[i][2] - tris[i][0]));
    }
    if (scale <= 1e-300) continue;  // vanishes at every sample: mass 0
    const double budget_total = q.tol * scale;
    for (std::size_t i = 0; i < tris.size(); ++i) {
      double tri_area =
          0.5 * std::abs(cross(tris[i][1] - tris[i][0], tris[i][2] - tris[i][0]));
      double budget = budget_total * (tri_area / std::max(total_area, 1e-300));
      total += detail::adaptive_triangle(d, tris[i][0], tris[i][1], tris[i][2],
                                         budget, 0, q.max_depth);
    }
  }
  return std::max(total, 0.0);
}

// Line integral of the density along [a, b] (arc-length element).
inline double integrate_segment(const Density& d, Vec2 a, Vec2 b,
                                double tol = kTolInt) {
  const double len = dist(a, b);
  if (len <= 0.0) return 0.0;

  if (!d.has_support_constraint()) {
    if (d.kind() == DensityKind::Uniform) return d.constant() * len;
    if (d.kind() == DensityKind::MonomialYn) {
      // Clip to {y >= 0}; y is linear along the segment, closed form.
      double ya = a.y, yb = b.y;
      if (ya <= 0.0 && yb <= 0.0) return 0.0;
      Vec2 a2 = a, b2 = b;
      if (ya < 0.0) a2 = a + (0.0 - ya) / (yb - ya) * (b - a);
      if (yb < 0.0) b2 = a + (0.0 - ya) / (yb - ya) * (b - a);
      double y0 = std::max(a2.y, 0.0), y1 = std::max(b2.y, 0.0);
      double seg_len = dist(a2, b2);
      double k = d.monomial_exponent(), c = d.constant();
      if (std::abs(y1 - y0) < 1e-14 * (1.0 + std::abs(y0)))
        return c * std::pow(0.5 * (y0 + y1), k) * seg_len;
      double prim =
          (std::pow(y1, k + 1.0) - std::pow(y0, k + 1.0)) / (k + 1.0);
      return c * seg_len * prim / (y1 - y0);
    }
  }

  auto f = [&](double t) { return d.eval(a + t * (b - a)); };
  if (d.degenerate_on_y_axis() && a.y * b.y < 0.0) {
    double tc = a.y / (a.y - b.y);
    return len * (detail::adaptive_gl_1d(f, 0.0, tc, tol, 0, 40) +
                  detail::adaptive_gl_1d(f, tc, 1.0, tol, 0, 40));
  }
  return len * detail::adaptive_gl_1d(f, 0.0, 1.0, tol, 0, 40);
}

}  // namespace otlab
