#pragma once

// Semi-discrete optimal transport: sampling of the target measure, Laguerre
// diagrams in the max-plane convention, a damped-Newton solver for the
// Kantorovich dual with coarse-to-fine initialization, and the resulting
// piecewise-linear Brenier potential u(x) = max_i(<x, y_i> - psi_i) together
// with its Legendre data.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "otlab/density.hpp"
#include "otlab/quadrature.hpp"

namespace otlab {

inline constexpr double kTolMass = 1e-6;
inline constexpr double kNewtonTol = 1e-7;
inline constexpr int kMaxNewton = 100;
inline constexpr int kMaxHalvings = 20;

// ---------------------------------------------------------------- cloud

struct TargetCloud {
  std::vector<Vec2> points;   // y_i in closure of the target domain
  std::vector<double> masses; // nu_i > 0
  double total_mass = 0.0;    // = sum of masses

  std::size_t size() const { return points.size(); }
};

namespace detail {

// Exact upper bound for a density over a convex polygon.  Every factor
// (y^k, r^l, 1 + a r^alpha) is monotone in a convex function of x, so the
// extremes occur at vertices.
inline double density_sup_bound(const Density& d, const Polygon& poly) {
  double max_y = 0.0, max_r = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    max_y = std::max(max_y, poly[i].y);
    max_r = std::max(max_r, norm(poly[i]));
  }
  switch (d.kind()) {
    case DensityKind::Uniform:
      return d.constant();
    case DensityKind::MonomialYn:
      return d.constant() * std::pow(std::max(max_y, 0.0),
                                     d.monomial_exponent());
    case DensityKind::RadialHomog: {
      double prof = 1.0;
      if (!d.profile_empty()) {
        prof = 0.0;
        for (double v : d.profile_samples()) prof = std::max(prof, v);
      }
      return d.constant() * prof * std::pow(max_r, d.radial_exponent());
    }
    case DensityKind::HolderPerturbed: {
      double base = density_sup_bound(*d.base(), poly);
      return base * (1.0 + std::abs(d.holder_amplitude()) *
                               std::pow(max_r, d.holder_alpha()));
    }
  }
  return d.constant();
}

// Uniform-grid accelerator for nearest-site queries (used by the empirical
// Lloyd iteration, where pool points greatly outnumber sites).
class NearestSiteGrid {
 public:
  void build(const std::vector<Vec2>& sites) {
    sites_ = &sites;
    const std::size_t n = sites.size();
    lo_ = {std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
    hi_ = {-lo_.x, -lo_.y};
    for (Vec2 s : sites) {
      lo_.x = std::min(lo_.x, s.x);
      lo_.y = std::min(lo_.y, s.y);
      hi_.x = std::max(hi_.x, s.x);
      hi_.y = std::max(hi_.y, s.y);
    }
    dim_ = std::max<int>(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
    double floor_w = 1e-12 + 1e-9 * (norm(lo_) + norm(hi_));
    cw_ = {std::max((hi_.x - lo_.x) / dim_, floor_w),
           std::max((hi_.y - lo_.y) / dim_, floor_w)};
    buckets_.assign(static_cast<std::size_t>(dim_) * dim_, {});
    for (std::size_t i = 0; i < n; ++i) {
      buckets_[bucket_of(sites[i])].push_back(static_cast<int>(i));
    }
  }

  int nearest(Vec2 p) const {
    int cx = clamp_idx((p.x - lo_.x) / cw_.x);
    int cy = clamp_idx((p.y - lo_.y) / cw_.y);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    const double min_cw = std::min(cw_.x, cw_.y);
    for (int ring = 0; ring < 2 * dim_ + 2; ++ring) {
      if (best >= 0) {
        double lb = (ring - 1.0) * min_cw;
        if (lb > 0.0 && lb * lb > best_d2) break;
      }
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          int bx = cx + dx, by = cy + dy;
          if (bx < 0 || bx >= dim_ || by < 0 || by >= dim_) continue;
          for (int idx : buckets_[static_cast<std::size_t>(by) * dim_ + bx]) {
            double d2 = norm2((*sites_)[idx] - p);
            if (d2 < best_d2) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    return best;
  }

 private:
  int clamp_idx(double v) const {
    return std::clamp(static_cast<int>(v), 0, dim_ - 1);
  }
  std::size_t bucket_of(Vec2 p) const {
    return static_cast<std::size_t>(clamp_idx((p.y - lo_.y) / cw_.y)) * dim_ +
           clamp_idx((p.x - lo_.x) / cw_.x);
  }

  const std::vector<Vec2>* sites_ = nullptr;
  Vec2 lo_, hi_, cw_;
  int dim_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace detail

// ------------------------------------------------------------- laguerre

// A Laguerre cell plus provenance: the neighbor sites whose bisector
// half-planes actually clipped the cell (superset of the sites sharing a
// final facet; used to recover shared edges for the Hessian).
struct LaguerreCell {
  Polygon poly;
  std::vector<int> cut_by;
};

// cell_i = source intersected with {x : <x, y_j - y_i> <= psi_j - psi_i} for
// every j != i.  Far sites are pruned with the cell's bounding ball; sites
// are visited nearest-first so the ball shrinks early.
inline std::vector<LaguerreCell> laguerre_cells(
    const Polygon& source, const std::vector<Vec2>& pts,
    const std::vector<double>& weights,
    const std::vector<std::vector<int>>* neighbor_order = nullptr) {
  const std::size_t n = pts.size();
  if (weights.size() != n)
    throw ConfigError("laguerre_cells: weights/points size mismatch");
  for (double w : weights)
    if (!std::isfinite(w))
      throw ConfigError("laguerre_cells: weights must be finite");

  std::vector<LaguerreCell> cells(n);
  std::vector<int> order_scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const int* order = nullptr;
    std::size_t order_len = 0;
    if (neighbor_order) {
      order = (*neighbor_order)[i].data();
      order_len = (*neighbor_order)[i].size();
    } else {
      order_scratch.resize(n);
      std::iota(order_scratch.begin(), order_scratch.end(), 0);
      std::sort(order_scratch.begin(), order_scratch.end(), [&](int a, int b) {
        return norm2(pts[a] - pts[i]) < norm2(pts[b] - pts[i]);
      });
      order = order_scratch.data();
      order_len = n;
    }

    Polygon cell = source;
    std::vector<int>& cut_by = cells[i].cut_by;
    // bounding ball of the current cell
    Vec2 center{0.0, 0.0};
    double radius = 0.0;
    auto update_ball = [&]() {
      if (cell.size() == 0) return;
      Vec2 lo = cell[0], hi = cell[0];
      for (std::size_t v = 1; v < cell.size(); ++v) {
        lo.x = std::min(lo.x, cell[v].x);
        lo.y = std::min(lo.y, cell[v].y);
        hi.x = std::max(hi.x, cell[v].x);
        hi.y = std::max(hi.y, cell[v].y);
      }
      center = 0.5 * (lo + hi);
      radius = 0.0;
      for (std::size_t v = 0; v < cell.size(); ++v)
        radius = std::max(radius, norm(cell[v] - center));
    };
    update_ball();

    for (std::size_t t = 0; t < order_len && cell.size() >= 3; ++t) {
      const int j = order[t];
      if (static_cast<std::size_t>(j) == i) continue;
      const Vec2 d = pts[j] - pts[i];
      const double off = weights[j] - weights[i];
      const double proj = dot(d, center);
      const double reach = norm(d) * radius;
      if (proj + reach <= off) continue;  // constraint inactive on the cell
      if (proj - reach >= off) {          // entire cell violates
        cell = Polygon{};
        break;
      }
      cell = clip(cell, HalfPlane{d, off});
      cut_by.push_back(j);
      update_ball();
    }
    cells[i].poly = std::move(cell);
  }
  return cells;
}

inline std::vector<Polygon> laguerre_diagram(const Polygon& source,
                                             const TargetCloud& cloud,
                                             const std::vector<double>& weights) {
  std::vector<LaguerreCell> cells = laguerre_cells(source, cloud.points, weights);
  std::vector<Polygon> polys;
  polys.reserve(cells.size());
  for (LaguerreCell& c : cells) polys.push_back(std::move(c.poly));
  return polys;
}

// ------------------------------------------------------- sample_target

// N sites from Lloyd-relaxed density-weighted sampling (empirical Lloyd on a
// large rejection-sampled pool, fixed iteration count), with exact Voronoi
// masses nu_i computed by quadrature afterwards.  When pin_origin is set and
// the origin lies in the closure of the domain, the site nearest the origin
// is snapped to y = 0 and moved to index 0.
inline TargetCloud sample_target(const Polygon& domain, const Density& g,
                                 std::size_t n_sites, std::uint64_t seed,
                                 bool pin_origin = false) {
  if (n_sites < 1) throw ConfigError("sample_target: N must be >= 1");
  if (domain.size() < 3)
    throw DegenerateRegion("sample_target: degenerate target domain");

  const double sup_g = detail::density_sup_bound(g, domain);
  if (!(sup_g > 0.0))
    throw SamplingFailure("sample_target: density vanishes on the domain");

  Vec2 lo = domain[0], hi = domain[0];
  for (std::size_t v = 1; v < domain.size(); ++v) {
    lo.x = std::min(lo.x, domain[v].x);
    lo.y = std::min(lo.y, domain[v].y);
    hi.x = std::max(hi.x, domain[v].x);
    hi.y = std::max(hi.y, domain[v].y);
  }

  // Rejection-sampled pool distributed as g restricted to the domain.
  const std::size_t pool_size = std::max<std::size_t>(4096, 32 * n_sites);
  std::vector<Vec2> pool;
  pool.reserve(pool_size);
  Rng rng(seed);
  std::size_t attempts = 0;
  const std::size_t max_attempts = 20000 * pool_size;
  while (pool.size() < pool_size) {
    if (++attempts > max_attempts)
      throw SamplingFailure("sample_target: rejection sampling stalled");
    Vec2 p{rng.range(lo.x, hi.x), rng.range(lo.y, hi.y)};
    if (!domain.contains(p)) continue;
    if (rng.unit() * sup_g <= g.eval(p)) pool.push_back(p);
  }
  if (n_sites > pool.size())
    throw SamplingFailure("sample_target: N exceeds resolvable distinct sites");

  // Empirical Lloyd: k-means on the pool, sites seeded from the pool head.
  std::vector<Vec2> sites(pool.begin(), pool.begin() + n_sites);
  const int lloyd_iters = 25;
  detail::NearestSiteGrid grid;
  std::vector<Vec2> sums(n_sites);
  std::vector<std::size_t> counts(n_sites);
  std::vector<int> assign(pool.size());
  for (int it = 0; it < lloyd_iters; ++it) {
    grid.build(sites);
    std::fill(sums.begin(), sums.end(), Vec2{0.0, 0.0});
    std::fill(counts.begin(), counts.end(), std::size_t{0});
    for (std::size_t p = 0; p < pool.size(); ++p) {
      int idx = grid.nearest(pool[p]);
      assign[p] = idx;
      sums[idx] += pool[p];
      counts[idx] += 1;
    }
    // reseed empty clusters at the pool point farthest from its site
    for (std::size_t k = 0; k < n_sites; ++k) {
      if (counts[k] > 0) continue;
      double best = -1.0;
      std::size_t pick = 0;
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (counts[assign[p]] <= 1) continue;  // don't orphan another cluster
        double d2 = norm2(pool[p] - sites[assign[p]]);
        if (d2 > best) {
          best = d2;
          pick = p;
        }
      }
      if (best < 0.0)
        throw SamplingFailure("sample_target: N exceeds resolvable distinct sites");
      counts[assign[pick]] -= 1;
      sums[assign[pick]] -= pool[pick];
      assign[pick] = static_cast<int>(k);
      sums[k] = pool[pick];
      counts[k] = 1;
    }
    for (std::size_t k = 0; k < n_sites; ++k)
      sites[k] = sums[k] / static_cast<double>(counts[k]);
  }

  if (pin_origin) {
    if (!domain.contains({0.0, 0.0}, 1e-7))
      throw ConfigError("sample_target: pin_origin with origin outside domain");
    std::size_t nearest = 0;
    for (std::size_t k = 1; k < n_sites; ++k)
      if (norm2(sites[k]) < norm2(sites[nearest])) nearest = k;
    sites[nearest] = {0.0, 0.0};
    std::swap(sites[0], sites[nearest]);
  }

  // Distinctness: Lloyd separates sites; verify the invariant holds.
  const double dist_tol = kTolGeom * (1.0 + norm(hi - lo));
  for (std::size_t a = 0; a < n_sites; ++a)
    for (std::size_t b = a + 1; b < n_sites; ++b)
      if (norm(sites[a] - sites[b]) <= dist_tol)
        throw SamplingFailure("sample_target: N exceeds resolvable distinct sites");

  // Exact Voronoi masses.  In the max-plane convention the Euclidean Voronoi
  // diagram is the Laguerre diagram with weights |y|^2 / 2 (zero weights give
  // the normal fan of the cloud instead).
  TargetCloud cloud;
  cloud.points = std::move(sites);
  cloud.masses.resize(n_sites);
  std::vector<double> vor_w(n_sites);
  for (std::size_t k = 0; k < n_sites; ++k)
    vor_w[k] = 0.5 * norm2(cloud.points[k]);
  std::vector<LaguerreCell> cells =
      laguerre_cells(domain, cloud.points, vor_w);
  cloud.total_mass = 0.0;
  for (std::size_t k = 0; k < n_sites; ++k) {
    double m = cells[k].poly.size() >= 3 ? integrate(g, cells[k].poly) : 0.0;
    if (!(m > 0.0))
      throw SamplingFailure("sample_target: a Voronoi cell carries no mass");
    cloud.masses[k] = m;
    cloud.total_mass += m;
  }
  return cloud;
}

// ----------------------------------------------------------------- plan

struct TransportPlan {
  Polygon source;
  Density source_density;
  TargetCloud cloud;  // masses rescaled to exact balance with mu(source)
  std::vector<double> weights;
  std::vector<Polygon> cells;
  std::vector<double> cell_masses;
  double residual = 0.0;  // max_i |mass(cell_i) - nu_i| / nu_i
  int iterations = 0;
  std::uint64_t seed = 0;      // provenance only
  double mass_rescale = 1.0;   // factor applied to the input masses
  bool converged = false;

  std::size_t size() const { return cloud.points.size(); }
};

struct SolveOptions {
  double newton_tol = kNewtonTol;
  int max_newton = kMaxNewton;
  int max_halvings = kMaxHalvings;
  Quadrature quad = Quadrature::adaptive();
  bool multiscale = true;
};

namespace detail {

inline std::vector<std::vector<int>> neighbor_orders(
    const std::vector<Vec2>& pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<int>> orders(n);
  for (std::size_t i = 0; i < n; ++i) {
    orders[i].resize(n);
    std::iota(orders[i].begin(), orders[i].end(), 0);
    std::sort(orders[i].begin(), orders[i].end(), [&](int a, int b) {
      return norm2(pts[a] - pts[i]) < norm2(pts[b] - pts[i]);
    });
  }
  return orders;
}

inline std::vector<double> cell_mass_vector(const Density& g,
                                            const std::vector<LaguerreCell>& cells,
                                            const Quadrature& quad) {
  std::vector<double> masses(cells.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].poly.size() >= 3) masses[i] = integrate(g, cells[i].poly, quad);
  return masses;
}

struct HessEdge {
  int i, j;
  double w;  // integral of g/|y_i - y_j| over the shared facet
};

// Recover shared facets from cut provenance and integrate g along them.
inline std::vector<HessEdge> hessian_edges(const Density& g,
                                           const std::vector<Vec2>& pts,
                                           const std::vector<double>& weights,
                                           const std::vector<LaguerreCell>& cells) {
  std::vector<HessEdge> edges;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Polygon& poly = cells[i].poly;
    if (poly.size() < 3) continue;
    for (int j : cells[i].cut_by) {
      if (static_cast<std::size_t>(j) <= i) continue;  // handle each pair once
      if (cells[j].poly.size() < 3) continue;
      const Vec2 d = pts[j] - pts[i];
      const double off = weights[j] - weights[i];
      const double nd = norm(d);
      for (std::size_t e = 0; e < poly.size(); ++e) {
        const Vec2 a = poly[e];
        const Vec2 b = poly[(e + 1) % poly.size()];
        const double tol = 1e-9 * nd * (1.0 + norm(a) + norm(b));
        if (std::abs(dot(a, d) - off) > tol) continue;
        if (std::abs(dot(b, d) - off) > tol) continue;
        double line_mass = integrate_segment(g, a, b);
        if (line_mass > 0.0)
          edges.push_back({static_cast<int>(i), j, line_mass / nd});
        break;
      }
    }
  }
  return edges;
}

inline bool adjacency_connected(std::size_t n, const std::vector<HessEdge>& edges) {
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(n);
  for (const HessEdge& e : edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
  }
  return reached == n;
}

// Solve (-H) delta = F on indices 1..n-1 with delta_0 = 0 pinned (gauge).
// -H is the weighted graph Laplacian restricted to the non-pinned block:
// symmetric positive-definite whenever the adjacency graph is connected.
// Jacobi-preconditioned conjugate gradients.
inline std::vector<double> solve_newton_system(std::size_t n,
                                               const std::vector<HessEdge>& edges,
                                               const std::vector<double>& f) {
  std::vector<double> diag(n, 0.0);
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const HessEdge& e : edges) {
    diag[e.i] += e.w;
    diag[e.j] += e.w;
    adj[e.i].push_back({e.j, e.w});
    adj[e.j].push_back({e.i, e.w});
  }
  auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 1; i < n; ++i) {
      double acc = diag[i] * x[i];
      for (const auto& [j, w] : adj[i])
        if (j != 0) acc -= w * x[j];
      y[i] = acc;
    }
  };

  std::vector<double> x(n, 0.0), r(n, 0.0), z(n, 0.0), p(n, 0.0), ap(n, 0.0);
  double b2 = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    r[i] = f[i];
    b2 += f[i] * f[i];
  }
  if (b2 <= 0.0) return x;
  auto precond = [&](const std::vector<double>& rr, std::vector<double>& zz) {
    for (std::size_t i = 1; i < n; ++i)
      zz[i] = rr[i] / (diag[i] > 0.0 ? diag[i] : 1.0);
  };
  precond(r, z);
  p = z;
  double rz = 0.0;
  for (std::size_t i = 1; i < n; ++i) rz += r[i] * z[i];
  const double tol2 = 1e-26 * b2;
  const std::size_t max_cg = 20 * n + 100;
  for (std::size_t it = 0; it < max_cg; ++it) {
    double r2 = 0.0;
    for (std::size_t i = 1; i < n; ++i) r2 += r[i] * r[i];
    if (r2 <= tol2) break;
    matvec(p, ap);
    double pap = 0.0;
    for (std::size_t i = 1; i < n; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0)) break;  // numerically semi-definite: accept iterate
    double alpha = rz / pap;
    for (std::size_t i = 1; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    precond(r, z);
    double rz_new = 0.0;
    for (std::size_t i = 1; i < n; ++i) rz_new += r[i] * z[i];
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 1; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return x;
}

// Guaranteed-nonempty seed: weights realizing the Voronoi diagram of the
// site constellation shrunk about an interior point of the source, so every
// shrunk site (hence its own cell) lies inside the source.
inline std::vector<double> seed_weights(const Polygon& source,
                                        const std::vector<Vec2>& pts) {
  Vec2 c = area_centroid(source).centroid;
  double shrink = 1.0;
  for (Vec2 y : pts) {
    Vec2 dir = y - c;
    if (norm(dir) <= kTolGeom) continue;
    double t_max = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < source.size(); ++e) {
      Vec2 a = source[e];
      Vec2 b = source[(e + 1) % source.size()];
      Vec2 n_out = -1.0 * rot90(b - a);  // CCW polygon: rot90(edge) is inward
      double denom = dot(n_out, dir);
      if (denom <= 0.0) continue;
      double head = dot(n_out, a - c);
      t_max = std::min(t_max, head / denom);
    }
    if (std::isfinite(t_max)) shrink = std::min(shrink, 0.8 * t_max);
  }
  shrink = std::max(shrink, 1e-9);
  std::vector<double> psi(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    psi[i] = dot(c, pts[i]) + 0.5 * shrink * norm2(pts[i] - c);
  return psi;
}

struct NewtonResult {
  std::vector<LaguerreCell> cells;
  std::vector<double> masses;
  double residual = 0.0;
  int iterations = 0;
};

inline double max_rel_residual(const std::vector<double>& masses,
                               const std::vector<double>& nu) {
  double r = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i)
    r = std::max(r, std::abs(masses[i] - nu[i]) / nu[i]);
  return r;
}

// Damped Newton on the Kantorovich dual.  psi[0] is pinned to zero (gauge);
// steps are halved until every cell keeps mass >= eps0 and the residual
// decreases by the classical (1 - t/2) factor.
inline NewtonResult damped_newton(const Polygon& source, const Density& g,
                                  const std::vector<Vec2>& pts,
                                  const std::vector<double>& nu,
                                  std::vector<double>& psi, double tol,
                                  int max_iter, int max_halvings,
                                  const Quadrature& quad,
                                  const std::vector<std::vector<int>>& orders) {
  const std::size_t n = pts.size();
  const double gauge = psi[0];
  for (double& w : psi) w -= gauge;

  NewtonResult st;
  st.cells = laguerre_cells(source, pts, psi, &orders);
  st.masses = cell_mass_vector(g, st.cells, quad);

  double min_init = *std::min_element(st.masses.begin(), st.masses.end());
  if (!(min_init > 0.0))
    throw SingularHessian(
        "damped_newton: initialization produced an empty cell");
  double min_nu = *std::min_element(nu.begin(), nu.end());
  const double eps0 = 0.5 * std::min(min_nu, min_init);

  st.residual = max_rel_residual(st.masses, nu);
  std::vector<double> f(n), trial(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    if (st.residual <= tol) return st;
    st.iterations = iter + 1;

    for (std::size_t i = 0; i < n; ++i) f[i] = st.masses[i] - nu[i];
    std::vector<HessEdge> edges = hessian_edges(g, pts, psi, st.cells);
    if (!adjacency_connected(n, edges))
      throw SingularHessian("damped_newton: Laguerre adjacency disconnected");
    std::vector<double> delta = solve_newton_system(n, edges, f);

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= max_halvings; ++h, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = psi[i] + t * delta[i];
      std::vector<LaguerreCell> tc = laguerre_cells(source, pts, trial, &orders);
      std::vector<double> tm = cell_mass_vector(g, tc, quad);
      double tmin = *std::min_element(tm.begin(), tm.end());
      double tres = max_rel_residual(tm, nu);
      if (tmin >= eps0 && tres <= (1.0 - 0.5 * t) * st.residual + 1e-15) {
        psi = trial;
        st.cells = std::move(tc);
        st.masses = std::move(tm);
        st.residual = tres;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NonConvergence("damped_newton: line search stalled");
  }
  if (st.residual > tol)
    throw NonConvergence("damped_newton: max iterations exceeded");
  return st;
}

// Coarse-to-fine cascade: solve a 4:1 decimated cloud loosely, lift the
// weights through psi_i = |y_i|^2/2 + (psi_c - |y_c|^2/2) over the nearest
// coarse site, recursing down to a guaranteed-nonempty Voronoi seed.
inline std::vector<double> multiscale_weights(const Polygon& source,
                                              const Density& g,
                                              const std::vector<Vec2>& pts,
                                              const std::vector<double>& nu,
                                              const Quadrature& quad) {
  const std::size_t n = pts.size();
  if (n <= 32) return seed_weights(source, pts);

  std::vector<std::size_t> coarse_idx;
  for (std::size_t i = 0; i < n; i += 4) coarse_idx.push_back(i);
  const std::size_t nc = coarse_idx.size();
  std::vector<Vec2> cpts(nc);
  for (std::size_t k = 0; k < nc; ++k) cpts[k] = pts[coarse_idx[k]];

  std::vector<int> owner(n, 0);
  std::vector<double> cnu(nc, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nc; ++k) {
      double d2 = norm2(pts[i] - cpts[k]);
      if (d2 < bd) {
        bd = d2;
        best = k;
      }
    }
    owner[i] = static_cast<int>(best);
    cnu[best] += nu[i];
  }
  for (double m : cnu)
    if (!(m > 0.0)) return seed_weights(source, pts);  // degenerate decimation

  std::vector<double> cpsi = multiscale_weights(source, g, cpts, cnu, quad);
  try {
    std::vector<std::vector<int>> corders = neighbor_orders(cpts);
    damped_newton(source, g, cpts, cnu, cpsi, 1e-3, kMaxNewton, kMaxHalvings,
                  quad, corders);
  } catch (const Error&) {
    return seed_weights(source, pts);  // fall back to the guaranteed seed
  }

  std::vector<double> psi(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = owner[i];
    psi[i] = 0.5 * norm2(pts[i]) + (cpsi[k] - 0.5 * norm2(cpts[k]));
  }
  return psi;
}

}  // namespace detail

// ----------------------------------------------------------------- solve

inline TransportPlan solve(const Polygon& source, const Density& g,
                           const TargetCloud& cloud,
                           std::optional<std::vector<double>> init_weights = {},
                           const SolveOptions& opts = {}) {
  const std::size_t n = cloud.size();
  if (n == 0) throw ConfigError("solve: empty target cloud");
  if (cloud.masses.size() != n)
    throw ConfigError("solve: cloud points/masses size mismatch");
  for (double m : cloud.masses)
    if (!(m > 0.0)) throw ConfigError("solve: cloud masses must be positive");
  if (init_weights && init_weights->size() != n)
    throw ConfigError("solve: init_weights size mismatch");

  const double mu = integrate(g, source, opts.quad);
  double total = std::accumulate(cloud.masses.begin(), cloud.masses.end(), 0.0);
  if (std::abs(mu - total) > kTolMass * std::max(std::abs(mu), std::abs(total)))
    throw ConfigError("solve: mass balance violated beyond tolerance");

  TransportPlan plan;
  plan.source = source;
  plan.source_density = g;
  plan.cloud = cloud;
  plan.mass_rescale = mu / total;
  for (double& m : plan.cloud.masses) m *= plan.mass_rescale;
  plan.cloud.total_mass = mu;
  const std::vector<double>& nu = plan.cloud.masses;
  const std::vector<Vec2>& pts = plan.cloud.points;

  std::vector<std::vector<int>> orders = detail::neighbor_orders(pts);
  std::vector<double> psi;
  detail::NewtonResult result;
  if (init_weights) {
    psi = *init_weights;
    result = detail::damped_newton(source, g, pts, nu, psi, opts.newton_tol,
                                   opts.max_newton, opts.max_halvings,
                                   opts.quad, orders);
  } else {
    psi = opts.multiscale
              ? detail::multiscale_weights(source, g, pts, nu, opts.quad)
              : detail::seed_weights(source, pts);
    try {
      result = detail::damped_newton(source, g, pts, nu, psi, opts.newton_tol,
                                     opts.max_newton, opts.max_halvings,
                                     opts.quad, orders);
    } catch (const SingularHessian&) {
      // the lifted cascade weights can under-resolve a cell; retry from the
      // guaranteed-nonempty Voronoi seed before giving up
      psi = detail::seed_weights(source, pts);
      result = detail::damped_newton(source, g, pts, nu, psi, opts.newton_tol,
                                     opts.max_newton, opts.max_halvings,
                                     opts.quad, orders);
    }
  }

  plan.weights = std::move(psi);
  plan.cells.reserve(n);
  for (LaguerreCell& c : result.cells) plan.cells.push_back(std::move(c.poly));
  plan.cell_masses = std::move(result.masses);
  plan.residual = result.residual;
  plan.iterations = result.iterations;
  plan.converged = true;
  return plan;
}

// ----------------------------------------------------- potential & dual

struct PotentialValue {
  double u = 0.0;
  Vec2 gradient;
  int cell = -1;
};

// u(x) = max_i(<x, y_i> - psi_i); ties broken toward the lowest index.
inline PotentialValue potential_eval(const TransportPlan& plan, Vec2 x) {
  PotentialValue out;
  out.u = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    double v = dot(x, plan.cloud.points[i]) - plan.weights[i];
    if (v > out.u) {
      out.u = v;
      out.cell = static_cast<int>(i);
    }
  }
  out.gradient = plan.cloud.points[out.cell];
  return out;
}

struct LegendrePoint {
  Vec2 y;
  double v = 0.0;
  bool cell_empty = false;
};

/// Fenchel-Young data: v(y_i) = psi_i wherever cell_i is non-empty.
inline std::vector<LegendrePoint> legendre_dual(const TransportPlan& plan) {
  std::vector<LegendrePoint> out;
  out.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i)
    out.push_back({plan.cloud.points[i], plan.weights[i],
                   plan.cells[i].size() < 3});
  return out;
}

}  // namespace otlab
