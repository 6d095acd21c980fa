#pragma once

// Self-describing persistence for transport plans (and the density
// descriptors they embed).  Doubles are serialized in decimal with enough
// significant digits that the round-trip is bit-exact.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "otlab/sdot.hpp"

namespace otlab {

using json = nlohmann::json;

// ---------------------------------------------------------------- density

inline json density_to_json(const Density& d) {
  json j;
  switch (d.kind()) {
    case DensityKind::Uniform:
      j["kind"] = "uniform";
      j["constant"] = d.constant();
      break;
    case DensityKind::MonomialYn:
      j["kind"] = "monomial_yn";
      j["exponent"] = d.monomial_exponent();
      j["constant"] = d.constant();
      break;
    case DensityKind::RadialHomog:
      j["kind"] = "radial";
      j["exponent"] = d.radial_exponent();
      j["constant"] = d.constant();
      if (!d.profile_empty()) j["profile"] = d.profile_samples();
      break;
    case DensityKind::HolderPerturbed:
      j["kind"] = "holder";
      j["amplitude"] = d.holder_amplitude();
      j["alpha"] = d.holder_alpha();
      j["base"] = density_to_json(*d.base());
      break;
  }
  if (d.support_half()) {
    const HalfPlane& h = *d.support_half();
    j["support_half"] = {{"normal", {h.normal.x, h.normal.y}},
                         {"offset", h.offset}};
  }
  if (d.support_sector()) {
    const Sector& s = *d.support_sector();
    j["support_sector"] = {{"lo", s.lo}, {"hi", s.hi}};
  }
  return j;
}

inline Density density_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  Density d = Density::uniform();
  if (kind == "uniform") {
    d = Density::uniform(j.at("constant").get<double>());
  } else if (kind == "monomial_yn") {
    d = Density::monomial_yn(j.at("exponent").get<double>(),
                             j.at("constant").get<double>());
  } else if (kind == "radial") {
    std::vector<double> profile;
    if (j.contains("profile")) profile = j.at("profile").get<std::vector<double>>();
    d = Density::radial_homog(j.at("exponent").get<double>(), std::move(profile),
                              j.at("constant").get<double>());
  } else if (kind == "holder") {
    d = Density::holder_perturbed(density_from_json(j.at("base")),
                                  j.at("amplitude").get<double>(),
                                  j.at("alpha").get<double>());
  } else {
    throw ConfigError("density_from_json: unknown kind '" + kind + "'");
  }
  if (j.contains("support_half")) {
    const json& h = j.at("support_half");
    d = d.with_support(HalfPlane{{h.at("normal").at(0).get<double>(),
                                  h.at("normal").at(1).get<double>()},
                                 h.at("offset").get<double>()});
  }
  if (j.contains("support_sector")) {
    const json& s = j.at("support_sector");
    d = d.with_support(Sector::of(s.at("lo").get<double>(),
                                  s.at("hi").get<double>()));
  }
  return d;
}

// ------------------------------------------------------------------- plan

namespace detail {

inline json points_to_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (Vec2 p : pts) arr.push_back({p.x, p.y});
  return arr;
}

inline std::vector<Vec2> points_from_json(const json& arr) {
  std::vector<Vec2> pts;
  pts.reserve(arr.size());
  for (const json& p : arr)
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace detail

inline json plan_to_json(const TransportPlan& plan) {
  json j;
  j["format"] = "otlab-plan";
  j["version"] = 1;
  json src = json::array();
  for (std::size_t i = 0; i < plan.source.size(); ++i)
    src.push_back({plan.source[i].x, plan.source[i].y});
  j["source"] = std::move(src);
  j["density"] = density_to_json(plan.source_density);
  j["cloud"] = {{"points", detail::points_to_json(plan.cloud.points)},
                {"masses", plan.cloud.masses},
                {"total_mass", plan.cloud.total_mass}};
  j["weights"] = plan.weights;
  j["meta"] = {{"iterations", plan.iterations},
               {"residual", plan.residual},
               {"seed", plan.seed},
               {"mass_rescale", plan.mass_rescale},
               {"converged", plan.converged}};
  return j;
}

inline TransportPlan plan_from_json(const json& j) {
  if (!j.contains("format") || j.at("format").get<std::string>() != "otlab-plan")
    throw ConfigError("plan_from_json: not a transport-plan document");
  if (j.at("version").get<int>() != 1)
    throw ConfigError("plan_from_json: unsupported version");
  TransportPlan plan;
  plan.source = Polygon::from(detail::points_from_json(j.at("source")));
  plan.source_density = density_from_json(j.at("density"));
  plan.cloud.points = detail::points_from_json(j.at("cloud").at("points"));
  plan.cloud.masses = j.at("cloud").at("masses").get<std::vector<double>>();
  plan.cloud.total_mass = j.at("cloud").at("total_mass").get<double>();
  plan.weights = j.at("weights").get<std::vector<double>>();
  const json& meta = j.at("meta");
  plan.iterations = meta.at("iterations").get<int>();
  plan.residual = meta.at("residual").get<double>();
  plan.seed = meta.at("seed").get<std::uint64_t>();
  plan.mass_rescale = meta.at("mass_rescale").get<double>();
  plan.converged = meta.at("converged").get<bool>();
  // Derived state is rebuilt deterministically from the stored inputs.
  plan.cells = laguerre_diagram(plan.source, plan.cloud, plan.weights);
  plan.cell_masses.assign(plan.size(), 0.0);
  for (std::size_t i = 0; i < plan.size(); ++i)
    if (plan.cells[i].size() >= 3)
      plan.cell_masses[i] = integrate(plan.source_density, plan.cells[i]);
  return plan;
}

inline void save_plan(const TransportPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_plan: cannot open '" + path + "'");
  out << plan_to_json(plan).dump(2) << "\n";
  if (!out) throw ConfigError("save_plan: write failed for '" + path + "'");
}

inline TransportPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_plan: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("load_plan: parse error: ") + e.what());
  }
  return plan_from_json(j);
}

}  // namespace otlab
