#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "otlab/plan_io.hpp"
#include "otlab/sdot.hpp"
#include "oracles.hpp"

using namespace otlab;
using Catch::Approx;

namespace {

Polygon half_disk(double radius, int arc_points = 129) {
  std::vector<Vec2> vs;
  for (int i = 0; i < arc_points; ++i) {
    double t = kPi * i / (arc_points - 1);
    vs.push_back({radius * std::cos(t), radius * std::sin(t)});
  }
  return Polygon::from(std::move(vs));
}

TransportPlan manual_plan(Polygon source, std::vector<Vec2> pts,
                          std::vector<double> weights) {
  TransportPlan plan;
  plan.source = std::move(source);
  plan.source_density = Density::uniform();
  plan.cloud.points = std::move(pts);
  plan.cloud.masses.assign(plan.cloud.points.size(), 1.0);
  plan.weights = std::move(weights);
  plan.cells = laguerre_diagram(plan.source, plan.cloud, plan.weights);
  return plan;
}

double mean_squared_displacement(const TransportPlan& plan,
                                 const std::function<Vec2(Vec2)>& target_map,
                                 int samples, Rng& rng) {
  Vec2 lo = plan.source[0], hi = plan.source[0];
  for (std::size_t v = 1; v < plan.source.size(); ++v) {
    lo.x = std::min(lo.x, plan.source[v].x);
    lo.y = std::min(lo.y, plan.source[v].y);
    hi.x = std::max(hi.x, plan.source[v].x);
    hi.y = std::max(hi.y, plan.source[v].y);
  }
  double acc = 0.0;
  int used = 0;
  while (used < samples) {
    Vec2 x{rng.range(lo.x, hi.x), rng.range(lo.y, hi.y)};
    if (!plan.source.contains(x)) continue;
    Vec2 grad = potential_eval(plan, x).gradient;
    acc += norm2(grad - target_map(x));
    ++used;
  }
  return acc / samples;
}

}  // namespace

// ------------------------------------------------------------ sample_target

TEST_CASE("sample_target: single site sits at the centroid", "[sdot]") {
  TargetCloud c = sample_target(Polygon::rect(0, 0, 1, 1), Density::uniform(),
                                1, 2024);
  REQUIRE(c.size() == 1);
  CHECK(norm(c.points[0] - Vec2{0.5, 0.5}) <= 0.02);  // empirical Lloyd mean
  CHECK(c.masses[0] == Approx(1.0).margin(1e-9));
  CHECK(c.total_mass == Approx(1.0).margin(1e-9));
}

TEST_CASE("sample_target: masses partition the target mass", "[sdot]") {
  Polygon square = Polygon::rect(0, 0, 1, 1);
  TargetCloud c = sample_target(square, Density::uniform(), 100, 7);
  REQUIRE(c.size() == 100);
  double sum = 0.0;
  for (double m : c.masses) {
    CHECK(m > 0.0);
    sum += m;
  }
  CHECK(sum == Approx(1.0).margin(1e-9));
  for (Vec2 p : c.points) CHECK(square.contains(p, 1e-7));
  // pairwise distinct
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b)
      CHECK(norm(c.points[a] - c.points[b]) > kTolGeom);
}

TEST_CASE("sample_target: degenerate density on the half-disk", "[sdot]") {
  Polygon dom = half_disk(1.0);
  TargetCloud c = sample_target(dom, Density::monomial_yn(1.0), 500, 20260816);
  // integral of y over the half-disk of radius 1 is 2/3 (polygon
  // discretization of the arc costs ~1e-4 relative)
  CHECK(c.total_mass == Approx(2.0 / 3.0).margin(1e-3));
  for (double m : c.masses) CHECK(m > 0.0);
}

TEST_CASE("sample_target: pinned origin site", "[sdot]") {
  Polygon square = Polygon::rect(0, 0, 1, 1);
  TargetCloud c = sample_target(square, Density::uniform(), 40, 99, true);
  REQUIRE(c.size() == 40);
  CHECK(c.points[0].x == 0.0);
  CHECK(c.points[0].y == 0.0);
  CHECK(c.masses[0] > 0.0);
  double sum = 0.0;
  for (double m : c.masses) sum += m;
  CHECK(sum == Approx(1.0).margin(1e-9));
}

TEST_CASE("sample_target: deterministic in the seed", "[sdot]") {
  Polygon square = Polygon::rect(-1, -1, 1, 1);
  TargetCloud a = sample_target(square, Density::uniform(), 25, 42);
  TargetCloud b = sample_target(square, Density::uniform(), 25, 42);
  TargetCloud c = sample_target(square, Density::uniform(), 25, 43);
  REQUIRE(a.size() == b.size());
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && a.points[i].x == b.points[i].x &&
                a.points[i].y == b.points[i].y && a.masses[i] == b.masses[i];
    differs = differs || a.points[i].x != c.points[i].x;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("sample_target: vanishing density is rejected", "[sdot]") {
  // monomial y^k clamps to zero below the axis; a domain in y < 0 holds no mass
  CHECK_THROWS_AS(sample_target(Polygon::rect(-1, -2, 1, -1),
                                Density::monomial_yn(1.0), 8, 5),
                  SamplingFailure);
}

// --------------------------------------------------------- laguerre_diagram

TEST_CASE("laguerre_diagram: equal weights split the square evenly", "[sdot]") {
  TargetCloud cloud;
  cloud.points = {{-1.0, 0.0}, {1.0, 0.0}};
  cloud.masses = {8.0, 8.0};
  Polygon box = Polygon::rect(-2, -2, 2, 2);
  std::vector<Polygon> cells = laguerre_diagram(box, cloud, {0.0, 0.0});
  REQUIRE(cells.size() == 2);
  CHECK(area_or_zero(cells[0]) == Approx(8.0).margin(1e-9));
  CHECK(area_or_zero(cells[1]) == Approx(8.0).margin(1e-9));
  CHECK(oracles::hausdorff_sampled(cells[0], Polygon::rect(-2, -2, 0, 2)) <= 1e-9);
  CHECK(oracles::hausdorff_sampled(cells[1], Polygon::rect(0, -2, 2, 2)) <= 1e-9);
}

TEST_CASE("laguerre_diagram: weighted bisector moves the dividing line",
          "[sdot]") {
  TargetCloud cloud;
  cloud.points = {{-1.0, 0.0}, {1.0, 0.0}};
  cloud.masses = {1.0, 1.0};
  Polygon box = Polygon::rect(-2, -2, 2, 2);
  std::vector<double> psi{0.0, 0.4};
  std::vector<Polygon> cells = laguerre_diagram(box, cloud, psi);
  // bisector: <x, y_1 - y_0> = psi_1 - psi_0, i.e. 2 x = 0.4, the line x = 0.2
  CHECK(oracles::hausdorff_sampled(cells[0], Polygon::rect(-2, -2, 0.2, 2)) <=
        1e-9);
  CHECK(oracles::hausdorff_sampled(cells[1], Polygon::rect(0.2, -2, 2, 2)) <=
        1e-9);
  // brute-force classification oracle: argmax of the affine forms
  Rng rng(314);
  for (int rep = 0; rep < 500; ++rep) {
    Vec2 x{rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)};
    if (std::abs(x.x - 0.2) < 1e-6) continue;
    double v0 = dot(x, cloud.points[0]) - psi[0];
    double v1 = dot(x, cloud.points[1]) - psi[1];
    int winner = v0 >= v1 ? 0 : 1;
    CHECK(cells[winner].contains(x, 1e-9));
  }
}

TEST_CASE("laguerre_diagram: single site keeps the whole domain", "[sdot]") {
  TargetCloud cloud;
  cloud.points = {{0.3, 0.7}};
  cloud.masses = {1.0};
  Polygon box = Polygon::rect(0, 0, 1, 1);
  std::vector<Polygon> cells = laguerre_diagram(box, cloud, {0.0});
  REQUIRE(cells.size() == 1);
  CHECK(oracles::hausdorff_sampled(cells[0], box) <= 1e-12);
}

TEST_CASE("laguerre_cells: tiling holds for arbitrary weights", "[sdot]") {
  Rng rng(4711);
  Polygon dom = Polygon::rect(-1.0, 0.1, 1.5, 1.8);  // kept in y > 0
  std::vector<Density> densities = {Density::uniform(2.0),
                                    Density::monomial_yn(1.5)};
  for (const Density& g : densities) {
    double mu = integrate(g, dom);
    for (int rep = 0; rep < 3; ++rep) {
      std::size_t n = 40;
      std::vector<Vec2> pts;
      std::vector<double> w;
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({rng.range(-1.0, 1.5), rng.range(0.1, 1.8)});
        w.push_back(0.5 * norm2(pts.back()) + rng.range(-0.05, 0.05));
      }
      std::vector<LaguerreCell> cells = laguerre_cells(dom, pts, w);
      double area_sum = 0.0, mass_sum = 0.0;
      for (const LaguerreCell& c : cells) {
        area_sum += area_or_zero(c.poly);
        if (c.poly.size() >= 3) mass_sum += integrate(g, c.poly);
      }
      CHECK(area_sum == Approx(area_or_zero(dom)).epsilon(1e-9));
      CHECK(mass_sum == Approx(mu).epsilon(1e-7));
    }
  }
}

TEST_CASE("laguerre_diagram: gauge invariance under weight shifts", "[sdot]") {
  Rng rng(99);
  TargetCloud cloud;
  for (int i = 0; i < 24; ++i) {
    cloud.points.push_back({rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)});
    cloud.masses.push_back(1.0);
  }
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  std::vector<double> psi;
  for (int i = 0; i < 24; ++i) psi.push_back(0.5 * norm2(cloud.points[i]));
  std::vector<Polygon> base = laguerre_diagram(box, cloud, psi);
  for (double& w : psi) w += 17.25;
  std::vector<Polygon> shifted = laguerre_diagram(box, cloud, psi);
  for (std::size_t i = 0; i < base.size(); ++i) {
    REQUIRE(base[i].size() == shifted[i].size());
    if (base[i].size() < 3) continue;
    CHECK(oracles::hausdorff_sampled(base[i], shifted[i], 40) <= 1e-9);
  }
}

// -------------------------------------------------------------------- solve

TEST_CASE("solve: single-site plan is trivial", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  TargetCloud cloud;
  cloud.points = {{0.25, -0.5}};
  cloud.masses = {4.0};
  TransportPlan plan = solve(box, Density::uniform(), cloud);
  CHECK(plan.converged);
  CHECK(plan.iterations == 0);
  CHECK(plan.weights[0] == 0.0);
  CHECK(plan.residual <= kNewtonTol);
  CHECK(oracles::hausdorff_sampled(plan.cells[0], box) <= 1e-12);
}

TEST_CASE("solve: identity map on the square", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Density g = Density::uniform();
  TargetCloud cloud = sample_target(box, g, 48, 11);
  TransportPlan plan = solve(box, g, cloud);
  CHECK(plan.converged);
  CHECK(plan.residual <= kNewtonTol);

  // solved cell masses match the prescribed ones
  double mass_sum = 0.0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(std::abs(plan.cell_masses[i] - plan.cloud.masses[i]) <=
          kNewtonTol * plan.cloud.masses[i]);
    mass_sum += plan.cell_masses[i];
  }
  CHECK(mass_sum == Approx(4.0).epsilon(1e-7));

  // mean-squared displacement from the identity is discretization-level
  Rng rng(500);
  double msd = mean_squared_displacement(
      plan, [](Vec2 x) { return x; }, 4000, rng);
  CHECK(msd <= 1.5 / std::sqrt(48.0));

  // cyclical monotonicity of the discrete map on cell centroids
  std::vector<Vec2> centroids(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i)
    centroids[i] = area_centroid(plan.cells[i]).centroid;
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (std::size_t j = i + 1; j < plan.size(); ++j)
      CHECK(dot(centroids[i] - centroids[j],
                plan.cloud.points[i] - plan.cloud.points[j]) >= -kTolGeom);

  // gauge invariance: shifting all weights leaves every cell unchanged
  std::vector<double> shifted = plan.weights;
  for (double& w : shifted) w += 3.5;
  std::vector<Polygon> cells2 = laguerre_diagram(box, plan.cloud, shifted);
  for (std::size_t i = 0; i < plan.size(); ++i)
    if (plan.cells[i].size() >= 3)
      CHECK(oracles::hausdorff_sampled(plan.cells[i], cells2[i], 40) <= 1e-9);
}

TEST_CASE("solve: assignment oracle agrees at small N", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Density g = Density::uniform();
  const std::size_t n = 32;
  TargetCloud cloud = sample_target(box, g, n, 5);
  const double mu = 4.0;
  for (double& m : cloud.masses) m = mu / n;  // equal masses for the LP oracle
  cloud.total_mass = mu;
  TransportPlan plan = solve(box, g, cloud);
  REQUIRE(plan.converged);

  std::vector<Vec2> centroids(n);
  for (std::size_t i = 0; i < n; ++i)
    centroids[i] = area_centroid(plan.cells[i]).centroid;
  double induced = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    induced += norm2(centroids[i] - plan.cloud.points[i]);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i][j] = norm2(centroids[i] - plan.cloud.points[j]);
  double lp = oracles::assignment_cost(cost);
  CHECK(induced >= lp - 1e-12);
  CHECK(induced <= 1.01 * lp);
}

TEST_CASE("solve: linear map between affine images", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Mat2 a = Mat2::diag(2.0, 0.5);
  Polygon image = Polygon::rect(-2, -0.5, 2, 0.5);
  Density g = Density::uniform();

  auto run = [&](std::size_t n, std::uint64_t seed) {
    TargetCloud cloud = sample_target(image, g, n, seed);
    for (double& m : cloud.masses) m = 4.0 / n;
    cloud.total_mass = 4.0;
    return solve(box, g, cloud);
  };

  TransportPlan plan = run(64, 21);
  REQUIRE(plan.converged);
  Rng rng(808);
  double msd = mean_squared_displacement(
      plan, [&](Vec2 x) { return a * x; }, 4000, rng);
  CHECK(msd <= 1.5 / std::sqrt(64.0));

  // LP oracle on the induced assignment
  const std::size_t n = plan.size();
  std::vector<Vec2> centroids(n);
  for (std::size_t i = 0; i < n; ++i)
    centroids[i] = area_centroid(plan.cells[i]).centroid;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i][j] = norm2(centroids[i] - plan.cloud.points[j]);
  double induced = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    induced += norm2(centroids[i] - plan.cloud.points[i]);
  double lp = oracles::assignment_cost(cost);
  CHECK(induced <= 1.01 * lp + 1e-12);

  // Legendre weights fit (1/2) y^T A^{-1} y + const, tighter as N grows
  auto v_fit_rms = [&](const TransportPlan& p) {
    std::vector<LegendrePoint> dual = legendre_dual(p);
    Mat2 ai = a.inverse();
    double mean = 0.0;
    std::vector<double> res;
    for (const LegendrePoint& lp_pt : dual) {
      if (lp_pt.cell_empty) continue;
      double q = 0.5 * dot(ai * lp_pt.y, lp_pt.y);
      res.push_back(lp_pt.v - q);
      mean += res.back();
    }
    mean /= res.size();
    double rms = 0.0;
    for (double r : res) rms += (r - mean) * (r - mean);
    return std::sqrt(rms / res.size());
  };
  double rms_coarse = v_fit_rms(run(24, 9));
  double rms_fine = v_fit_rms(run(96, 9));
  CHECK(rms_fine <= 0.08);
  CHECK(rms_fine < rms_coarse);
}

TEST_CASE("solve: Hessian matches finite differences", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  std::vector<Density> densities = {Density::uniform()};
  densities.push_back(Density::monomial_yn(1.0));
  Polygon dom_upper = Polygon::rect(-1, 0.05, 1, 1.2);

  for (std::size_t di = 0; di < densities.size(); ++di) {
    const Density& g = densities[di];
    const Polygon& dom = di == 0 ? box : dom_upper;
    TargetCloud cloud = sample_target(dom, g, 8, 77 + di);
    const std::size_t n = cloud.size();
    std::vector<double> psi = detail::seed_weights(dom, cloud.points);

    auto masses_at = [&](const std::vector<double>& w) {
      std::vector<LaguerreCell> cells = laguerre_cells(dom, cloud.points, w);
      return detail::cell_mass_vector(g, cells, Quadrature::adaptive());
    };

    std::vector<LaguerreCell> cells = laguerre_cells(dom, cloud.points, psi);
    std::vector<detail::HessEdge> edges =
        detail::hessian_edges(g, cloud.points, psi, cells);
    std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
    for (const detail::HessEdge& e : edges) {
      h[e.i][e.j] = e.w;
      h[e.j][e.i] = e.w;
      h[e.i][e.i] -= e.w;
      h[e.j][e.j] -= e.w;
    }

    const double eps = 1e-6;
    double max_rel = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> wp = psi, wm = psi;
      wp[j] += eps;
      wm[j] -= eps;
      std::vector<double> mp = masses_at(wp), mm = masses_at(wm);
      for (std::size_t i = 0; i < n; ++i) {
        double fd = (mp[i] - mm[i]) / (2.0 * eps);
        double an = h[i][j];
        double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
        max_rel = std::max(max_rel, std::abs(fd - an) / scale);
      }
    }
    INFO("density " << di);
    CHECK(max_rel <= 1e-4);
  }
}

TEST_CASE("solve: error contracts", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Density g = Density::uniform();
  TargetCloud cloud;
  cloud.points = {{-0.5, 0.0}, {0.5, 0.0}};
  cloud.masses = {2.0, 2.0};
  cloud.total_mass = 4.0;

  // user-supplied initialization that empties the second cell
  CHECK_THROWS_AS(solve(box, g, cloud, std::vector<double>{0.0, 10.0}),
                  SingularHessian);

  // iteration budget exhausted before reaching newton_tol
  TargetCloud skew = cloud;
  skew.masses = {1.0, 3.0};
  SolveOptions opts;
  opts.max_newton = 0;
  CHECK_THROWS_AS(solve(box, g, skew, std::nullopt, opts), NonConvergence);

  // mass balance violated beyond tolerance
  TargetCloud bad = cloud;
  bad.masses = {1.0, 1.0};
  CHECK_THROWS_AS(solve(box, g, bad), ConfigError);
}

// --------------------------------------------------- potential & legendre

TEST_CASE("potential_eval: max-form values and tie-breaking", "[sdot]") {
  TransportPlan plan = manual_plan(Polygon::rect(-2, -2, 2, 2),
                                   {{-1.0, 0.0}, {1.0, 0.0}}, {0.0, 0.0});
  PotentialValue at = potential_eval(plan, {0.5, 0.0});
  CHECK(at.u == Approx(0.5).margin(1e-15));
  CHECK(at.cell == 1);
  CHECK(at.gradient.x == 1.0);

  // exact tie: broken toward the lowest index
  PotentialValue tie = potential_eval(plan, {0.0, 0.7});
  CHECK(tie.cell == 0);
  CHECK(tie.gradient.x == -1.0);

  // max-form inequality everywhere
  Rng rng(12);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec2 x{rng.range(-3.0, 3.0), rng.range(-3.0, 3.0)};
    PotentialValue pv = potential_eval(plan, x);
    for (std::size_t i = 0; i < plan.size(); ++i)
      CHECK(pv.u >= dot(x, plan.cloud.points[i]) - plan.weights[i] - 1e-12);
  }
}

TEST_CASE("potential_eval: pinned origin gauge", "[sdot]") {
  Polygon box = Polygon::rect(0, 0, 1, 1);
  Density g = Density::uniform();
  TargetCloud cloud = sample_target(box, g, 32, 3, true);
  REQUIRE(cloud.points[0].x == 0.0);
  TransportPlan plan = solve(box, g, cloud);
  PotentialValue at = potential_eval(plan, {0.0, 0.0});
  CHECK(at.u == 0.0);
  CHECK(at.cell == 0);
  CHECK(at.gradient.x == 0.0);
  CHECK(at.gradient.y == 0.0);
}

TEST_CASE("legendre_dual: Fenchel-Young data", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Density g = Density::uniform();
  TargetCloud cloud = sample_target(box, g, 40, 15);
  TransportPlan plan = solve(box, g, cloud);
  std::vector<LegendrePoint> dual = legendre_dual(plan);
  REQUIRE(dual.size() == plan.size());

  Rng rng(2718);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec2 x{rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)};
    std::size_t i = rng.index(plan.size());
    double u = potential_eval(plan, x).u;
    CHECK(u + dual[i].v >= dot(x, dual[i].y) - 1e-12);
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (dual[i].cell_empty) continue;
    Vec2 xc = area_centroid(plan.cells[i]).centroid;
    double u = potential_eval(plan, xc).u;
    CHECK(u + dual[i].v == Approx(dot(xc, dual[i].y)).margin(1e-9));
  }

  // one-site plan: v_0 = 0 under the pinned gauge
  TargetCloud single;
  single.points = {{0.5, 0.5}};
  single.masses = {4.0};
  TransportPlan one = solve(box, g, single);
  CHECK(legendre_dual(one)[0].v == 0.0);
}

TEST_CASE("plan persistence: bit-exact round-trip", "[sdot]") {
  Polygon box = Polygon::rect(-1, -1, 1, 1);
  Density g = Density::monomial_yn(1.0).with_support(
      HalfPlane::through({0.0, 0.0}, {0.0, 1.0}));
  Polygon dom = Polygon::rect(-1, 0.0, 1, 1.0);
  TargetCloud cloud = sample_target(dom, g, 20, 123);
  TransportPlan plan = solve(dom, g, cloud);
  plan.seed = 123;

  const std::string path = "/tmp/otlab_plan_roundtrip.json";
  save_plan(plan, path);
  TransportPlan back = load_plan(path);
  std::remove(path.c_str());

  REQUIRE(back.size() == plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(back.cloud.points[i].x == plan.cloud.points[i].x);
    CHECK(back.cloud.points[i].y == plan.cloud.points[i].y);
    CHECK(back.cloud.masses[i] == plan.cloud.masses[i]);
    CHECK(back.weights[i] == plan.weights[i]);
    CHECK(back.cells[i].size() == plan.cells[i].size());
  }
  CHECK(back.residual == plan.residual);
  CHECK(back.seed == plan.seed);
  CHECK(back.mass_rescale == plan.mass_rescale);
  CHECK(back.cloud.total_mass == plan.cloud.total_mass);
  CHECK(density_to_json(back.source_density) ==
        density_to_json(plan.source_density));
}
