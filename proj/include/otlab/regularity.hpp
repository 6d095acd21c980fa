#pragma once

// Diagnostics on piecewise-linear Brenier potentials: sections, centered
// sections, extrinsic balls, the monotonicity functional chi, roundness and
// scaling-exponent estimators, blow-up rescaling, and obliqueness checks.
// Everything is a pure function of an immutable TransportPlan.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "otlab/sdot.hpp"

namespace otlab {

inline constexpr double kSlopeTol = 0.07;      // |fitted - predicted| cap
inline constexpr double kEccCap = 3.0;         // roundness eccentricity cap
inline constexpr double kChiSlack = 0.05;      // chi monotonicity slack
inline constexpr double kCenterTol = 1e-3;     // |centroid - x0| <= tol * diam
inline constexpr int kMaxCenterIter = 60;
inline constexpr double kCenterDamping = 0.7;

// ------------------------------------------------------------- base point

// Normalized evaluation point: u0 = u(x0) and a chosen subgradient p0, so
// that u(x) - u0 - <p0, x - x0> >= 0 defines sections and extrinsic balls.
struct BasePoint {
  Vec2 x0;
  double u0 = 0.0;
  Vec2 p0;
};

// Subgradient selection: the unique gradient inside a cell; on a cell
// boundary the mass-weighted average of the touching fan's gradients (any
// convex combination of active sites is a valid subgradient).  With
// prefer_origin set, an active site at y = 0 is chosen exactly (the pinned
// gauge with 0 in the subdifferential).
inline BasePoint base_point(const TransportPlan& plan, Vec2 x0,
                            bool prefer_origin = false) {
  const std::size_t n = plan.size();
  BasePoint b;
  b.x0 = x0;
  b.u0 = potential_eval(plan, x0).u;
  const double tol = 1e-9 * (1.0 + std::abs(b.u0));

  Vec2 acc{0.0, 0.0};
  double mass_acc = 0.0;
  int actives = 0;
  Vec2 last_active;
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.cells[i].size() < 3) continue;
    double v = dot(x0, plan.cloud.points[i]) - plan.weights[i];
    if (v < b.u0 - tol) continue;
    if (prefer_origin && norm(plan.cloud.points[i]) <= kTolGeom) {
      b.p0 = {0.0, 0.0};
      return b;
    }
    double m = plan.cell_masses.empty() ? 1.0 : plan.cell_masses[i];
    acc += m * plan.cloud.points[i];
    mass_acc += m;
    last_active = plan.cloud.points[i];
    ++actives;
  }
  if (actives == 0) {
    // x0 sees only empty-cell planes (possible just outside the domain);
    // fall back to the max-attaining site of the full potential.
    b.p0 = potential_eval(plan, x0).gradient;
  } else if (actives == 1) {
    b.p0 = last_active;
  } else {
    b.p0 = acc / mass_acc;
  }
  return b;
}

namespace detail {

// Affine form of site i: l_i(x) = <x, y_i> - psi_i.
inline double site_plane(const TransportPlan& plan, std::size_t i, Vec2 x) {
  return dot(x, plan.cloud.points[i]) - plan.weights[i];
}

// Minimal max-affine extension of u over the plane: the maximum over planes
// of sites with non-empty cells (each touches the graph over the domain).
inline double extended_potential(const TransportPlan& plan, Vec2 x) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan.cells[i].size() < 3) continue;
    best = std::max(best, site_plane(plan, i, x));
  }
  return best;
}

// Exact oscillation of u over the domain: u is affine on every Laguerre
// cell, so both extremes over the cell union are attained at cell vertices.
inline double potential_oscillation(const TransportPlan& plan) {
  double umin = std::numeric_limits<double>::infinity();
  double umax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Polygon& cell = plan.cells[i];
    if (cell.size() < 3) continue;
    for (std::size_t v = 0; v < cell.size(); ++v) {
      double val = site_plane(plan, i, cell[v]);
      umin = std::min(umin, val);
      umax = std::max(umax, val);
    }
  }
  if (!(umax >= umin)) throw DegenerateRegion("potential_oscillation: no cells");
  return umax - umin;
}

// Second moment of the polygon about its centroid, normalized by area:
// C = area^{-1} * integral (x - c)(x - c)^T dx.  Standard closed form on the
// vertex fan, evaluated in centroid coordinates to avoid cancellation.
inline Mat2 polygon_covariance(const Polygon& p) {
  AreaCentroid ac = area_centroid(p);
  double ixx = 0.0, iyy = 0.0, ixy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vec2 a = p[i] - ac.centroid;
    Vec2 b = p[(i + 1) % p.size()] - ac.centroid;
    double c = cross(a, b);
    ixx += c * (a.x * a.x + a.x * b.x + b.x * b.x);
    iyy += c * (a.y * a.y + a.y * b.y + b.y * b.y);
    ixy += c * (2.0 * a.x * a.y + a.x * b.y + b.x * a.y + 2.0 * b.x * b.y);
  }
  ixx /= 12.0;
  iyy /= 12.0;
  ixy /= 24.0;
  return Mat2{ixx / ac.area, ixy / ac.area, ixy / ac.area, iyy / ac.area};
}

// Andrew monotone chain; strictly convex output (collinear points dropped).
inline Polygon convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) {
                          return dist(a, b) <= kTolGeom;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return Polygon::from(std::move(pts));
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 &&
           cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 1e-12)
      --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower &&
           cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 1e-12)
      --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return Polygon::from(std::move(hull));
}

// Half-planes of the sub-level set {u(x) - u0 - <p, x - x0> <= h}: one
// constraint per non-empty site, <x, y_i - p> <= h + psi_i + u0 - <x0, p>.
inline std::vector<HalfPlane> sublevel_halfplanes(const TransportPlan& plan,
                                                  Vec2 x0, double u0, Vec2 p,
                                                  double h) {
  std::vector<HalfPlane> hs;
  hs.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan.cells[i].size() < 3) continue;
    hs.push_back(HalfPlane{plan.cloud.points[i] - p,
                           h + plan.weights[i] + u0 - dot(x0, p)});
  }
  return hs;
}

// Number of non-empty Laguerre cells meeting the sub-level set.  u - l is
// affine on each cell, so the cell-wise minimum sits at a cell vertex.
inline std::size_t cells_touching_sublevel(const TransportPlan& plan, Vec2 x0,
                                           double u0, Vec2 p, double h) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Polygon& cell = plan.cells[i];
    if (cell.size() < 3) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < cell.size(); ++v) {
      double excess = site_plane(plan, i, cell[v]) - u0 - dot(p, cell[v] - x0);
      best = std::min(best, excess);
    }
    if (best <= h) ++count;
  }
  return count;
}

}  // namespace detail

// ----------------------------------------------------------------- section

struct Section {
  Polygon poly;
  bool saturated = false;  // section fills the whole domain
};

// S_h(u, x0) = {x in domain : u(x) - u0 - <p0, x - x0> <= h}, exact: the
// domain clipped by one half-plane per non-empty site (empty-cell planes are
// dominated inside the domain and add nothing).
inline Section section(const TransportPlan& plan, const BasePoint& base,
                       double h) {
  if (!(h > 0.0)) throw ConfigError("section: height must be > 0");
  Section out;
  out.poly = plan.source;
  for (const HalfPlane& hp : detail::sublevel_halfplanes(plan, base.x0, base.u0,
                                                         base.p0, h)) {
    out.poly = clip(out.poly, hp);
    if (out.poly.size() < 3) break;
  }
  double full = area_or_zero(plan.source);
  out.saturated = area_or_zero(out.poly) >= full * (1.0 - 1e-12);
  return out;
}

// --------------------------------------------------------- centered section

struct CenterOptions {
  double tol = kCenterTol;          // |centroid - x0| <= tol * diam(section)
  int max_iter = kMaxCenterIter;
  double damping = kCenterDamping;  // step factor on the Newton update
  double box_factor = 8.0;          // extension box inflation about the domain
};

struct CenteredSection {
  Polygon poly;   // sub-level set of the extension (may leave the domain)
  Vec2 slope;     // the centering slope p
  int iterations = 0;
  double center_residual = 0.0;  // |centroid - x0| / diam at acceptance
};

namespace detail {

inline Polygon extension_box(const Polygon& domain, double factor) {
  Vec2 lo = domain[0], hi = domain[0];
  for (std::size_t v = 1; v < domain.size(); ++v) {
    lo.x = std::min(lo.x, domain[v].x);
    lo.y = std::min(lo.y, domain[v].y);
    hi.x = std::max(hi.x, domain[v].x);
    hi.y = std::max(hi.y, domain[v].y);
  }
  Vec2 c = 0.5 * (lo + hi);
  Vec2 half = 0.5 * (hi - lo);
  double r = factor * std::max(half.x, half.y) + 1e-9;
  return Polygon::rect(c.x - r, c.y - r, c.x + r, c.y + r);
}

inline bool touches_box(const Polygon& poly, const Polygon& box) {
  Vec2 lo = box[0], hi = box[0];
  for (std::size_t v = 1; v < box.size(); ++v) {
    lo.x = std::min(lo.x, box[v].x);
    lo.y = std::min(lo.y, box[v].y);
    hi.x = std::max(hi.x, box[v].x);
    hi.y = std::max(hi.y, box[v].y);
  }
  double eps = 1e-9 * (1.0 + box.diameter());
  for (std::size_t v = 0; v < poly.size(); ++v) {
    Vec2 p = poly[v];
    if (p.x <= lo.x + eps || p.x >= hi.x - eps || p.y <= lo.y + eps ||
        p.y >= hi.y - eps)
      return true;
  }
  return false;
}

}  // namespace detail

// Finds the slope p with centroid(S) = x0 for the sub-level set of the
// minimal convex extension, S = {u_bar - u_bar(x0) - <p, x - x0> <= h},
// clipped to a large bounding box.  The box keeps the iteration defined even
// where the extension is flat (corner base points see unbounded sub-level
// sets for slopes outside the feasible cone); success requires the final
// section to stay clear of the box.  Steps follow the Newton direction of
// the quadratic model, cov^{-1} (x0 - centroid) scaled by h_eff/2 (the model
// covariance is (h_eff/2) Q^{-1}), with a doubling/halving line search on
// the centroid residual to cover non-quadratic geometries.
inline CenteredSection centered_section(const TransportPlan& plan, Vec2 x0,
                                        double h,
                                        const CenterOptions& opts = {}) {
  if (!(h > 0.0)) throw ConfigError("centered_section: height must be > 0");
  if (!plan.source.contains(x0, 1e-7))
    throw ConfigError("centered_section: x0 outside the domain closure");

  const double u0 = detail::extended_potential(plan, x0);
  const Polygon box = detail::extension_box(plan.source, opts.box_factor);
  Vec2 p = base_point(plan, x0).p0;

  auto cut = [&](Vec2 slope) {
    Polygon s = box;
    for (const HalfPlane& hp :
         detail::sublevel_halfplanes(plan, x0, u0, slope, h)) {
      s = clip(s, hp);
      if (s.size() < 3) break;
    }
    return s;
  };
  auto residual_of = [&](const Polygon& s) {
    if (s.size() < 3) return std::numeric_limits<double>::infinity();
    AreaCentroid ac;
    try {
      ac = area_centroid(s);
    } catch (const DegenerateRegion&) {
      return std::numeric_limits<double>::infinity();
    }
    return dist(ac.centroid, x0) / std::max(s.diameter(), 1e-300);
  };

  Polygon s = cut(p);
  double res = residual_of(s);
  if (!std::isfinite(res))
    throw CenteringFailure("centered_section: sub-level set degenerated");

  for (int it = 0; it < opts.max_iter; ++it) {
    if (res <= opts.tol) {
      if (detail::touches_box(s, box))
        throw CenteringFailure(
            "centered_section: section saturates the extension box");
      CenteredSection out;
      out.poly = std::move(s);
      out.slope = p;
      out.iterations = it;
      out.center_residual = res;
      return out;
    }
    AreaCentroid ac = area_centroid(s);
    // height of the model paraboloid at the current centroid
    double fc = detail::extended_potential(plan, ac.centroid) - u0 -
                dot(p, ac.centroid - x0);
    double h_eff = std::max(h - fc, 0.25 * h);
    Mat2 cov = detail::polygon_covariance(s);
    Mat2 cov_inv;
    try {
      cov_inv = cov.inverse();
    } catch (const Error&) {
      throw CenteringFailure("centered_section: singular section moment");
    }
    Vec2 dir = (0.5 * h_eff) * (cov_inv * (x0 - ac.centroid));

    // curvilinear search: start from the damped model step, grow while it
    // keeps improving, shrink when it does not
    double scale = opts.damping;
    Polygon s_best;
    double res_best = std::numeric_limits<double>::infinity();
    double scale_best = 0.0;
    for (int grow = 0; grow < 8; ++grow) {
      Polygon trial = cut(p + scale * dir);
      double r_trial = residual_of(trial);
      if (r_trial < res_best) {
        res_best = r_trial;
        s_best = std::move(trial);
        scale_best = scale;
        scale *= 2.0;
      } else {
        break;
      }
    }
    if (!(res_best < res)) {
      scale = 0.5 * opts.damping;
      for (int halve = 0; halve < 12 && !(res_best < res); ++halve) {
        Polygon trial = cut(p + scale * dir);
        double r_trial = residual_of(trial);
        if (r_trial < res_best) {
          res_best = r_trial;
          s_best = std::move(trial);
          scale_best = scale;
        }
        scale *= 0.5;
      }
    }
    if (!(res_best < res))
      throw CenteringFailure("centered_section: centering stalled");
    p += scale_best * dir;
    s = std::move(s_best);
    res = res_best;
  }
  throw CenteringFailure("centered_section: centering did not converge");
}

// ------------------------------------------------------------ extrinsic ball

// D_r = {x : <x - x0, grad u(x) - p0> <= r^2} as one polygon per cell
// (grad u is constant per cell, so each piece is a single half-plane clip).
// The vector is aligned with plan.cells; empty pieces stay empty polygons.
inline std::vector<Polygon> extrinsic_ball(const TransportPlan& plan,
                                           const BasePoint& base, double r) {
  if (!(r > 0.0)) throw ConfigError("extrinsic_ball: radius must be > 0");
  std::vector<Polygon> region(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Polygon& cell = plan.cells[i];
    if (cell.size() < 3) continue;
    Vec2 d = plan.cloud.points[i] - base.p0;
    if (norm(d) <= kTolGeom) {
      region[i] = cell;  // constraint 0 <= r^2 holds on the whole cell
      continue;
    }
    region[i] = clip(cell, HalfPlane{d, r * r + dot(base.x0, d)});
  }
  return region;
}

inline double region_mass(const Density& g, const std::vector<Polygon>& region,
                          const Quadrature& quad = Quadrature::adaptive()) {
  double m = 0.0;
  for (const Polygon& piece : region)
    if (piece.size() >= 3) m += integrate(g, piece, quad);
  return m;
}

// ----------------------------------------------------- monotonicity of chi

struct ChiViolation {
  std::size_t index;          // j with chi(r_{j+1}) > chi(r_j) * (1 + slack)
  double relative_increase;   // chi(r_{j+1}) / chi(r_j) - 1
};

struct MonotonicityTrace {
  std::vector<double> radii;
  std::vector<double> masses;  // mu(D_r)
  std::vector<double> chi;
  double exponent_used = 0.0;
  std::vector<ChiViolation> violations;
};

namespace detail {

inline void validate_radii(const std::vector<double>& radii) {
  if (radii.empty()) throw ConfigError("chi_trace: no radii");
  double prev = 0.0;
  for (double r : radii) {
    if (!(r > prev)) throw ConfigError("chi_trace: radii must be positive and strictly increasing");
    prev = r;
  }
}

inline void chi_violations(MonotonicityTrace& tr, double slack) {
  for (std::size_t j = 0; j + 1 < tr.chi.size(); ++j)
    if (tr.chi[j + 1] > tr.chi[j] * (1.0 + slack))
      tr.violations.push_back({j, tr.chi[j + 1] / tr.chi[j] - 1.0});
}

}  // namespace detail

// chi(r) = r^{-2(n+l)/(1+(n+l)/(n+k))} * mu(D_r) with n = 2; monotone
// non-increasing for exact solutions, constant exactly on conical ones.
inline MonotonicityTrace chi_trace(const TransportPlan& plan,
                                   const BasePoint& base, const Density& g,
                                   double l, double k,
                                   const std::vector<double>& radii,
                                   double slack = kChiSlack,
                                   const Quadrature& quad = Quadrature::adaptive()) {
  detail::validate_radii(radii);
  const double n = 2.0;
  MonotonicityTrace tr;
  tr.exponent_used = 2.0 * (n + l) / (1.0 + (n + l) / (n + k));
  tr.radii = radii;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    double m = region_mass(g, extrinsic_ball(plan, base, radii[j]), quad);
    if (j == 0 && !(m > 0.0))
      throw RadiusTooSmall("chi_trace: empty extrinsic ball at the smallest radius");
    tr.masses.push_back(m);
    tr.chi.push_back(std::pow(radii[j], -tr.exponent_used) * m);
  }
  detail::chi_violations(tr, slack);
  return tr;
}

// Analytic mode for the rigidity check: u = (1/2) x^T Q x on a sector with
// uniform density.  mu(D_r) = (1/2) * integral over the sector's angles of
// min(r / sqrt(d^T Q d), radius_cap)^2, evaluated by adaptive quadrature
// independently for every radius (no analytic cancellation of r).
inline MonotonicityTrace chi_trace_analytic(const Mat2& q, const Sector& s,
                                            double radius_cap,
                                            const std::vector<double>& radii,
                                            double slack = kChiSlack) {
  detail::validate_radii(radii);
  if (!q.symmetric(1e-12) || !(q.det() > 0.0) || !(q.trace() > 0.0))
    throw ConfigError("chi_trace_analytic: Q must be symmetric positive-definite");
  if (!(radius_cap > 0.0))
    throw ConfigError("chi_trace_analytic: radius cap must be > 0");
  if (!(s.span() > kAngleTol))
    throw ConfigError("chi_trace_analytic: degenerate sector");

  MonotonicityTrace tr;
  tr.exponent_used = 2.0;
  tr.radii = radii;
  for (double r : radii) {
    auto integrand = [&](double theta) {
      Vec2 d = unit_dir(theta);
      double quad_form = d.x * (q.a * d.x + q.b * d.y) +
                         d.y * (q.c * d.x + q.d * d.y);
      double rho = std::min(r / std::sqrt(quad_form), radius_cap);
      return 0.5 * rho * rho;
    };
    double m = detail::adaptive_gl_1d(integrand, s.lo, s.hi, 1e-13);
    tr.masses.push_back(m);
    tr.chi.push_back(std::pow(r, -2.0) * m);
  }
  detail::chi_violations(tr, slack);
  return tr;
}

// ------------------------------------------------------------ exponent fit

struct FitResult {
  double slope = 0.0;
  double half_width = 0.0;  // 2x standard error of the slope
  std::size_t samples = 0;
};

// Ordinary least squares on (log x, log y) over the window [win_lo, win_hi].
inline FitResult exponent_fit(const std::vector<double>& xs,
                              const std::vector<double>& ys, double win_lo,
                              double win_hi) {
  if (xs.size() != ys.size())
    throw ConfigError("exponent_fit: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < win_lo || xs[i] > win_hi) continue;
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw FitDomainError("exponent_fit: data must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const std::size_t m = lx.size();
  if (m < 2) throw FitDomainError("exponent_fit: need at least two samples in the window");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw FitDomainError("exponent_fit: degenerate abscissae");
  FitResult fit;
  fit.samples = m;
  fit.slope = sxy / sxx;
  if (m > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double e = ly[i] - my - fit.slope * (lx[i] - mx);
      ssr += e * e;
    }
    fit.half_width = 2.0 * std::sqrt(ssr / (static_cast<double>(m) - 2.0) / sxx);
  }
  return fit;
}

// -------------------------------------------------------- roundness profile

enum class RoundnessVerdict { Round, NonRound, Inconclusive };

inline const char* to_string(RoundnessVerdict v) {
  switch (v) {
    case RoundnessVerdict::Round: return "ROUND";
    case RoundnessVerdict::NonRound: return "NON_ROUND";
    case RoundnessVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct RoundnessOptions {
  double beta = 0.5;              // predicted axis slope 1/(1+(n+l)/(n+k))
  double slope_tol = kSlopeTol;
  double ecc_cap = kEccCap;
  std::size_t min_cells = 30;     // trusted sections contain >= this many cells
  double saturation_fraction = 0.1;  // h_max = fraction * osc(u)
  CenterOptions center;
};

struct SectionProfile {
  std::vector<double> heights;
  std::vector<Polygon> polygons;      // centered sections (empty on failure)
  std::vector<Ellipse> ellipses;      // Loewner ellipses of the sections
  std::vector<double> axis_major;
  std::vector<double> axis_minor;
  std::vector<double> eccentricities;
  std::vector<Vec2> center_slopes;
  std::vector<bool> trusted;
  FitResult slope_major;   // d log(axis_major) / d log(h) over trusted rows
  FitResult slope_minor;
  RoundnessVerdict verdict = RoundnessVerdict::Inconclusive;
  double beta_used = 0.5;
  double osc_u = 0.0;
  std::vector<std::size_t> nesting_violations;  // soft engulfing diagnostic
};

// Centered sections across a geometric ladder of heights, Loewner-ellipse
// axes, log-log axis slopes over the trusted window, and the verdict:
// ROUND when eccentricity stays capped and both slopes match beta;
// NON_ROUND when eccentricity at the smallest trusted height is at least
// twice the value at the largest; INCONCLUSIVE otherwise.
inline SectionProfile roundness_profile(const TransportPlan& plan, Vec2 x0,
                                        const std::vector<double>& heights,
                                        const RoundnessOptions& opts = {}) {
  if (heights.size() < 2)
    throw ConfigError("roundness_profile: need a ladder of heights");
  for (std::size_t j = 0; j + 1 < heights.size(); ++j)
    if (!(heights[j] > 0.0) || !(heights[j] < heights[j + 1]))
      throw ConfigError("roundness_profile: heights must be positive and increasing");

  SectionProfile prof;
  prof.heights = heights;
  prof.beta_used = opts.beta;
  prof.osc_u = detail::potential_oscillation(plan);
  const double u0 = detail::extended_potential(plan, x0);
  const double h_cap = opts.saturation_fraction * prof.osc_u;

  for (double h : heights) {
    bool ok = true;
    CenteredSection cs;
    try {
      cs = centered_section(plan, x0, h, opts.center);
    } catch (const CenteringFailure&) {
      ok = false;
    }
    Ellipse e;
    if (ok) {
      try {
        e = lowner_ellipse(cs.poly);
      } catch (const EllipseNonConvergence&) {
        ok = false;
      }
    }
    if (!ok) {
      prof.polygons.emplace_back();
      prof.ellipses.emplace_back();
      prof.axis_major.push_back(0.0);
      prof.axis_minor.push_back(0.0);
      prof.eccentricities.push_back(0.0);
      prof.center_slopes.push_back({0.0, 0.0});
      prof.trusted.push_back(false);
      continue;
    }
    Ellipse::Axes ax = e.axes();
    std::size_t cells =
        detail::cells_touching_sublevel(plan, x0, u0, cs.slope, h);
    prof.polygons.push_back(cs.poly);
    prof.ellipses.push_back(e);
    prof.axis_major.push_back(ax.major);
    prof.axis_minor.push_back(ax.minor);
    prof.eccentricities.push_back(ax.major / ax.minor);
    prof.center_slopes.push_back(cs.slope);
    prof.trusted.push_back(cells >= opts.min_cells && h <= h_cap);
  }

  // soft nesting diagnostic between consecutive non-empty sections
  for (std::size_t j = 0; j + 1 < prof.polygons.size(); ++j) {
    const Polygon& small = prof.polygons[j];
    const Polygon& big = prof.polygons[j + 1];
    if (small.size() < 3 || big.size() < 3) continue;
    bool nested = true;
    for (std::size_t v = 0; v < small.size() && nested; ++v) {
      Vec2 shrunk = x0 + (small[v] - x0) / (1.0 + kTolGeom);
      nested = big.contains(shrunk, kTolGeom * (1.0 + big.diameter()));
    }
    if (!nested) prof.nesting_violations.push_back(j);
  }

  std::vector<double> hs, majors, minors, eccs;
  for (std::size_t j = 0; j < heights.size(); ++j) {
    if (!prof.trusted[j]) continue;
    hs.push_back(heights[j]);
    majors.push_back(prof.axis_major[j]);
    minors.push_back(prof.axis_minor[j]);
    eccs.push_back(prof.eccentricities[j]);
  }
  if (hs.size() < 4)
    throw WindowTooNarrow("roundness_profile: fewer than 4 trusted heights");

  const double inf = std::numeric_limits<double>::infinity();
  prof.slope_major = exponent_fit(hs, majors, 0.0, inf);
  prof.slope_minor = exponent_fit(hs, minors, 0.0, inf);

  double max_ecc = *std::max_element(eccs.begin(), eccs.end());
  bool slopes_match = std::abs(prof.slope_major.slope - opts.beta) <= opts.slope_tol &&
                      std::abs(prof.slope_minor.slope - opts.beta) <= opts.slope_tol;
  if (max_ecc <= opts.ecc_cap && slopes_match) {
    prof.verdict = RoundnessVerdict::Round;
  } else if (eccs.front() >= 2.0 * eccs.back()) {
    prof.verdict = RoundnessVerdict::NonRound;
  } else {
    prof.verdict = RoundnessVerdict::Inconclusive;
  }
  return prof;
}

// ---------------------------------------------------------- v-section proxy

// Convex hull of the gradients of cells meeting S_h(u, x0): a two-sided
// proxy for the dual section S_h(v, grad u(x0)) up to dimensional constants.
inline Polygon v_section_proxy(const TransportPlan& plan, const BasePoint& base,
                               double h) {
  if (!(h > 0.0)) throw ConfigError("v_section_proxy: height must be > 0");
  std::vector<Vec2> touched;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Polygon& cell = plan.cells[i];
    if (cell.size() < 3) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < cell.size(); ++v) {
      double excess = detail::site_plane(plan, i, cell[v]) - base.u0 -
                      dot(base.p0, cell[v] - base.x0);
      best = std::min(best, excess);
    }
    if (best <= h) touched.push_back(plan.cloud.points[i]);
  }
  return detail::convex_hull(std::move(touched));
}

// ---------------------------------------------------------- blow-up rescale

// Loewner normalization of the centered section: A_h = M^{1/2} of the
// ellipse shape, u_tilde(x~) = (u_bar - tangent)(x0 + A_h^{-1} x~) / h.
// Holds copies of the potential data, so the frame outlives the plan.
struct BlowupFrame {
  Mat2 a = Mat2::identity();      // A_h
  Mat2 a_inv = Mat2::identity();
  Vec2 x0;
  double h = 0.0;
  Vec2 slope;                     // centering slope p
  double u0 = 0.0;                // u_bar(x0)
  Polygon rescaled_section;       // A_h (S^c_h - x0), approximately unit scale
  std::vector<Vec2> points;       // gradients of non-empty cells
  std::vector<double> weights;

  double operator()(Vec2 xt) const {
    Vec2 x = x0 + a_inv * xt;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
      best = std::max(best, dot(x, points[i]) - weights[i]);
    return (best - u0 - dot(slope, x - x0)) / h;
  }

  // max over unit-circle directions of |u~(t d) - t^degree u~(d)|
  double homogeneity_defect(double t, double degree, int samples = 64) const {
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
      Vec2 d = unit_dir(2.0 * kPi * i / samples);
      worst = std::max(worst, std::abs((*this)(t * d) -
                                       std::pow(t, degree) * (*this)(d)));
    }
    return worst;
  }
};

inline BlowupFrame blowup_rescale(const TransportPlan& plan, Vec2 x0, double h,
                                  const CenterOptions& opts = {}) {
  CenteredSection cs = centered_section(plan, x0, h, opts);
  Ellipse e = lowner_ellipse(cs.poly);
  BlowupFrame f;
  f.a = sqrt_spd(e.M);
  f.a_inv = f.a.inverse();
  f.x0 = x0;
  f.h = h;
  f.slope = cs.slope;
  f.u0 = detail::extended_potential(plan, x0);
  f.rescaled_section = cs.poly.translated(-1.0 * x0).transformed(f.a);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan.cells[i].size() < 3) continue;
    f.points.push_back(plan.cloud.points[i]);
    f.weights.push_back(plan.weights[i]);
  }
  return f;
}

// ------------------------------------------------------------- obliqueness

// Cosine of the angle between the tangent-sector bisectors at matched
// corners of the source and target domains (the polygon-corner reading of
// the supporting-normal product; reported, not asserted).
inline double obliqueness_check(const Polygon& source, Vec2 corner_x0,
                                const Polygon& target, Vec2 corner_y0) {
  auto vertex_index = [](const Polygon& p, Vec2 v) {
    double tol = kTolGeom * (1.0 + p.diameter());
    for (std::size_t i = 0; i < p.size(); ++i)
      if (dist(p[i], v) <= tol) return i;
    throw NotAVertex("obliqueness_check: point is not a polygon vertex");
  };
  Sector cs = tangent_cone(source, vertex_index(source, corner_x0));
  Sector ct = tangent_cone(target, vertex_index(target, corner_y0));
  return dot(cs.bisector(), ct.bisector());
}

// ------------------------------------------------------------ CSV reports

// Fixed schema: h_or_r, mass, chi, axis_major, axis_minor, eccentricity.
// Traces fill the first three columns; profiles fill mass with the section
// area and leave chi at zero.

inline void write_csv(std::ostream& os, const MonotonicityTrace& tr,
                      const std::string& scenario_hash,
                      const std::string& predictions = "") {
  os << "# scenario_hash: " << scenario_hash << "\n";
  os << "# kind: chi_trace exponent=" << fmt17(tr.exponent_used)
     << " violations=" << tr.violations.size() << "\n";
  if (!predictions.empty()) os << "# predictions: " << predictions << "\n";
  os << "h_or_r,mass,chi,axis_major,axis_minor,eccentricity\n";
  for (std::size_t j = 0; j < tr.radii.size(); ++j)
    os << fmt17(tr.radii[j]) << ',' << fmt17(tr.masses[j]) << ','
       << fmt17(tr.chi[j]) << ",0,0,0\n";
}

inline void write_csv(std::ostream& os, const SectionProfile& prof,
                      const std::string& scenario_hash,
                      const std::string& predictions = "") {
  os << "# scenario_hash: " << scenario_hash << "\n";
  os << "# kind: roundness_profile verdict=" << to_string(prof.verdict)
     << " slope_major=" << fmt17(prof.slope_major.slope)
     << " slope_minor=" << fmt17(prof.slope_minor.slope)
     << " beta=" << fmt17(prof.beta_used) << "\n";
  if (!predictions.empty()) os << "# predictions: " << predictions << "\n";
  os << "h_or_r,mass,chi,axis_major,axis_minor,eccentricity\n";
  for (std::size_t j = 0; j < prof.heights.size(); ++j)
    os << fmt17(prof.heights[j]) << ','
       << fmt17(area_or_zero(prof.polygons[j])) << ",0,"
       << fmt17(prof.axis_major[j]) << ',' << fmt17(prof.axis_minor[j]) << ','
       << fmt17(prof.eccentricities[j]) << "\n";
}

}  // namespace otlab
