#pragma once

// Scenario definitions, batch runner, persistence, and report emission: the
// plumbing through which every experiment in the suite is reproduced.
//
// Config format: JSON with // comments allowed.  Unknown keys are errors
// (fail-fast); every validation error names the offending field by path.
// CSV payloads share one fixed header per diagnostic kind and 17 significant
// digits throughout.  Two runs of the same scenario with the same seed emit
// byte-identical payloads, as does a replay from a persisted plan bundle.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "otlab/cones.hpp"
#include "otlab/plan_io.hpp"
#include "otlab/regularity.hpp"

namespace otlab {

namespace labdetail {

// ------------------------------------------------------ config primitives

inline std::string join_keys(std::initializer_list<const char*> a,
                             std::initializer_list<const char*> b) {
  std::string out;
  for (const char* k : a) out += std::string(out.empty() ? "" : ", ") + k;
  for (const char* k : b) out += std::string(out.empty() ? "" : ", ") + k;
  return out;
}

// Presence/absence gate: every required key present, every present key known.
inline void require_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object())
    throw ConfigError(where + ": expected an object");
  for (const char* k : required)
    if (!obj.contains(k))
      throw ConfigError(where + ": missing required key '" + k + "'");
  for (const auto& item : obj.items()) {
    const std::string& k = item.key();
    bool known = false;
    for (const char* r : required) known = known || k == r;
    for (const char* o : optional) known = known || k == o;
    if (!known)
      throw ConfigError(where + ": unknown key '" + k + "' (known keys: " +
                        join_keys(required, optional) + ")");
  }
}

inline double num_at(const json& obj, const char* key,
                     const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number())
    throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline double num_or(const json& obj, const char* key, double dflt,
                     const std::string& where) {
  return obj.contains(key) ? num_at(obj, key, where) : dflt;
}

inline long long int_at(const json& obj, const char* key,
                        const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<long long>();
}

inline long long int_or(const json& obj, const char* key, long long dflt,
                        const std::string& where) {
  return obj.contains(key) ? int_at(obj, key, where) : dflt;
}

inline std::string str_at(const json& obj, const char* key,
                          const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string())
    throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline bool bool_or(const json& obj, const char* key, bool dflt,
                    const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_boolean())
    throw ConfigError(where + "." + key + ": expected a boolean");
  return v.get<bool>();
}

inline std::vector<std::string> str_list_or(const json& obj, const char* key,
                                            const std::string& where) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const json& v = obj.at(key);
  if (!v.is_array())
    throw ConfigError(where + "." + key + ": expected an array of strings");
  for (const json& e : v) {
    if (!e.is_string())
      throw ConfigError(where + "." + key + ": expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline void check_identifier(const std::string& s, const std::string& where) {
  if (s.empty()) throw ConfigError(where + ": must be non-empty");
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      throw ConfigError(where + ": '" + s +
                        "' may only contain letters, digits, '_' and '-'");
}

inline double deg2rad(double d) { return d * kPi / 180.0; }

inline std::vector<double> geometric_ladder(double lo, double hi, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(count == 1 ? lo
                             : lo * std::pow(hi / lo, double(i) / (count - 1)));
  return out;
}

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace labdetail

// ------------------------------------------------------- polygon descriptor

// Parametric source/target families: axis-aligned squares and rectangles, a
// sector with vertex at the origin and a polygonal radius cap, the upper
// half-plane truncated to a box, a C^{1,beta} smoothed corner (boundary
// curve x2 = |x1|^{1+beta}), or an explicit convex vertex list.
struct PolygonSpec {
  std::string kind;
  double lo = 0.0, hi = 0.0;                       // square
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;   // rect
  double lo_deg = 0.0, hi_deg = 0.0, radius = 0.0; // sector
  double width = 0.0, height = 0.0;                // halfplane_cap
  double beta = 0.0, halfwidth = 0.0;              // smoothed_corner
  int segments = 0;
  std::vector<Vec2> points;                        // vertices

  static PolygonSpec parse(const json& j, const std::string& where) {
    using namespace labdetail;
    if (!j.is_object() || !j.contains("kind"))
      throw ConfigError(where + ": expected an object with a 'kind' key");
    PolygonSpec s;
    s.kind = str_at(j, "kind", where);
    if (s.kind == "square") {
      require_keys(j, where, {"kind", "lo", "hi"});
      s.lo = num_at(j, "lo", where);
      s.hi = num_at(j, "hi", where);
      if (!(s.hi > s.lo)) throw ConfigError(where + ": need hi > lo");
    } else if (s.kind == "rect") {
      require_keys(j, where, {"kind", "x0", "y0", "x1", "y1"});
      s.x0 = num_at(j, "x0", where);
      s.y0 = num_at(j, "y0", where);
      s.x1 = num_at(j, "x1", where);
      s.y1 = num_at(j, "y1", where);
      if (!(s.x1 > s.x0) || !(s.y1 > s.y0))
        throw ConfigError(where + ": need x1 > x0 and y1 > y0");
    } else if (s.kind == "sector") {
      require_keys(j, where, {"kind", "lo_deg", "hi_deg", "radius"},
                   {"segments"});
      s.lo_deg = num_at(j, "lo_deg", where);
      s.hi_deg = num_at(j, "hi_deg", where);
      s.radius = num_at(j, "radius", where);
      s.segments = static_cast<int>(int_or(j, "segments", 32, where));
      double span = s.hi_deg - s.lo_deg;
      if (!(span > 0.0) || span > 180.0)
        throw ConfigError(where + ": sector span must lie in (0, 180] degrees");
      if (!(s.radius > 0.0)) throw ConfigError(where + ": radius must be > 0");
      if (s.segments < 2 || s.segments > 512)
        throw ConfigError(where + ": segments must lie in [2, 512]");
    } else if (s.kind == "halfplane_cap") {
      require_keys(j, where, {"kind", "width", "height"});
      s.width = num_at(j, "width", where);
      s.height = num_at(j, "height", where);
      if (!(s.width > 0.0) || !(s.height > 0.0))
        throw ConfigError(where + ": width and height must be > 0");
    } else if (s.kind == "smoothed_corner") {
      require_keys(j, where, {"kind", "beta", "halfwidth", "height"},
                   {"segments"});
      s.beta = num_at(j, "beta", where);
      s.halfwidth = num_at(j, "halfwidth", where);
      s.height = num_at(j, "height", where);
      s.segments = static_cast<int>(int_or(j, "segments", 24, where));
      if (!(s.beta > 0.0) || s.beta > 1.0)
        throw ConfigError(where + ": beta must lie in (0, 1]");
      if (!(s.halfwidth > 0.0))
        throw ConfigError(where + ": halfwidth must be > 0");
      if (!(s.height > std::pow(s.halfwidth, 1.0 + s.beta)))
        throw ConfigError(where + ": height must exceed halfwidth^(1+beta)");
      if (s.segments < 2 || s.segments > 512)
        throw ConfigError(where + ": segments must lie in [2, 512]");
    } else if (s.kind == "vertices") {
      require_keys(j, where, {"kind", "points"});
      const json& pts = j.at("points");
      if (!pts.is_array() || pts.size() < 3)
        throw ConfigError(where + ".points: expected >= 3 [x, y] pairs");
      for (const json& p : pts) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
            !p[1].is_number())
          throw ConfigError(where + ".points: expected [x, y] pairs");
        s.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    } else {
      throw ConfigError(where + ".kind: unknown polygon kind '" + s.kind +
                        "' (square, rect, sector, halfplane_cap, "
                        "smoothed_corner, vertices)");
    }
    return s;
  }

  json to_json() const {
    json j;
    j["kind"] = kind;
    if (kind == "square") {
      j["lo"] = lo;
      j["hi"] = hi;
    } else if (kind == "rect") {
      j["x0"] = x0;
      j["y0"] = y0;
      j["x1"] = x1;
      j["y1"] = y1;
    } else if (kind == "sector") {
      j["lo_deg"] = lo_deg;
      j["hi_deg"] = hi_deg;
      j["radius"] = radius;
      j["segments"] = segments;
    } else if (kind == "halfplane_cap") {
      j["width"] = width;
      j["height"] = height;
    } else if (kind == "smoothed_corner") {
      j["beta"] = beta;
      j["halfwidth"] = halfwidth;
      j["height"] = height;
      j["segments"] = segments;
    } else {
      json pts = json::array();
      for (Vec2 p : points) pts.push_back(json::array({p.x, p.y}));
      j["points"] = pts;
    }
    return j;
  }

  Polygon build() const {
    if (kind == "square") return Polygon::rect(lo, lo, hi, hi);
    if (kind == "rect") return Polygon::rect(x0, y0, x1, y1);
    if (kind == "sector")
      return sector_polygon(
          Sector::of(labdetail::deg2rad(lo_deg), labdetail::deg2rad(hi_deg)),
          radius, segments + 1);
    if (kind == "halfplane_cap")
      return Polygon::rect(-0.5 * width, 0.0, 0.5 * width, height);
    if (kind == "smoothed_corner") {
      std::vector<Vec2> vs;
      for (int i = -segments; i <= segments; ++i) {
        double x = halfwidth * double(i) / segments;
        vs.push_back({x, std::pow(std::abs(x), 1.0 + beta)});
      }
      vs.push_back({halfwidth, height});
      vs.push_back({-halfwidth, height});
      return Polygon::from(std::move(vs));
    }
    return Polygon::from(points);
  }

  // Named boundary points resolvable from base-point and classify configs.
  std::map<std::string, Vec2> tags() const {
    std::map<std::string, Vec2> t;
    if (kind == "square") {
      t["sw"] = {lo, lo};
      t["se"] = {hi, lo};
      t["ne"] = {hi, hi};
      t["nw"] = {lo, hi};
      t["center"] = {0.5 * (lo + hi), 0.5 * (lo + hi)};
    } else if (kind == "rect") {
      t["sw"] = {x0, y0};
      t["se"] = {x1, y0};
      t["ne"] = {x1, y1};
      t["nw"] = {x0, y1};
      t["center"] = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
    } else if (kind == "sector") {
      t["apex"] = {0.0, 0.0};
    } else if (kind == "halfplane_cap") {
      t["origin"] = {0.0, 0.0};
      t["sw"] = {-0.5 * width, 0.0};
      t["se"] = {0.5 * width, 0.0};
      t["ne"] = {0.5 * width, height};
      t["nw"] = {-0.5 * width, height};
    } else if (kind == "smoothed_corner") {
      t["vertex"] = {0.0, 0.0};
      t["nw"] = {-halfwidth, height};
      t["ne"] = {halfwidth, height};
    } else {
      Polygon p = build();
      for (std::size_t i = 0; i < p.size(); ++i)
        t["v" + std::to_string(i)] = p[i];
    }
    return t;
  }
};

// ------------------------------------------------------- density descriptor

struct DensitySpec {
  std::string kind;  // uniform | monomial | radial | holder
  double c = 1.0;
  double k = 0.0;                   // monomial
  double l = 0.0;                   // radial
  std::vector<double> profile;      // radial
  double amplitude = 0.0, alpha = 1.0;
  std::shared_ptr<DensitySpec> base;  // holder

  static DensitySpec parse(const json& j, const std::string& where) {
    using namespace labdetail;
    if (!j.is_object() || !j.contains("kind"))
      throw ConfigError(where + ": expected an object with a 'kind' key");
    DensitySpec s;
    s.kind = str_at(j, "kind", where);
    if (s.kind == "uniform") {
      require_keys(j, where, {"kind"}, {"c"});
      s.c = num_or(j, "c", 1.0, where);
    } else if (s.kind == "monomial") {
      require_keys(j, where, {"kind", "k"}, {"c"});
      s.k = num_at(j, "k", where);
      s.c = num_or(j, "c", 1.0, where);
    } else if (s.kind == "radial") {
      require_keys(j, where, {"kind", "l"}, {"c", "profile"});
      s.l = num_at(j, "l", where);
      s.c = num_or(j, "c", 1.0, where);
      if (j.contains("profile")) {
        const json& pr = j.at("profile");
        if (!pr.is_array())
          throw ConfigError(where + ".profile: expected an array of numbers");
        for (const json& v : pr) {
          if (!v.is_number())
            throw ConfigError(where + ".profile: expected an array of numbers");
          s.profile.push_back(v.get<double>());
        }
      }
    } else if (s.kind == "holder") {
      require_keys(j, where, {"kind", "base", "amplitude", "alpha"});
      s.base = std::make_shared<DensitySpec>(
          parse(j.at("base"), where + ".base"));
      s.amplitude = num_at(j, "amplitude", where);
      s.alpha = num_at(j, "alpha", where);
    } else {
      throw ConfigError(where + ".kind: unknown density kind '" + s.kind +
                        "' (uniform, monomial, radial, holder)");
    }
    // Fail fast on range violations by exercising the factories once.
    try {
      s.build();
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
    return s;
  }

  json to_json() const {
    json j;
    j["kind"] = kind;
    if (kind == "uniform") {
      j["c"] = c;
    } else if (kind == "monomial") {
      j["k"] = k;
      j["c"] = c;
    } else if (kind == "radial") {
      j["l"] = l;
      j["c"] = c;
      if (!profile.empty()) j["profile"] = profile;
    } else {
      j["base"] = base->to_json();
      j["amplitude"] = amplitude;
      j["alpha"] = alpha;
    }
    return j;
  }

  Density build() const {
    if (kind == "uniform") return Density::uniform(c);
    if (kind == "monomial") return Density::monomial_yn(k, c);
    if (kind == "radial") return Density::radial_homog(l, profile, c);
    return Density::holder_perturbed(base->build(), amplitude, alpha);
  }
};

// ------------------------------------------------------------- base points

struct BasePointSpec {
  std::string label;
  std::optional<std::string> vertex;  // tag into the source polygon's tags()
  std::optional<Vec2> point;
  bool pin_origin = false;

  static BasePointSpec parse(const json& j, const std::string& where) {
    using namespace labdetail;
    require_keys(j, where, {"label"}, {"vertex", "point", "pin_origin"});
    BasePointSpec s;
    s.label = str_at(j, "label", where);
    check_identifier(s.label, where + ".label");
    if (j.contains("vertex") == j.contains("point"))
      throw ConfigError(where + ": give exactly one of 'vertex' or 'point'");
    if (j.contains("vertex")) s.vertex = str_at(j, "vertex", where);
    if (j.contains("point")) {
      const json& p = j.at("point");
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() ||
          !p[1].is_number())
        throw ConfigError(where + ".point: expected [x, y]");
      s.point = Vec2{p[0].get<double>(), p[1].get<double>()};
    }
    s.pin_origin = bool_or(j, "pin_origin", false, where);
    return s;
  }

  json to_json() const {
    json j;
    j["label"] = label;
    if (vertex) j["vertex"] = *vertex;
    if (point) j["point"] = json::array({point->x, point->y});
    j["pin_origin"] = pin_origin;
    return j;
  }

  Vec2 resolve(const std::map<std::string, Vec2>& tags,
               const std::string& where) const {
    if (point) return *point;
    auto it = tags.find(*vertex);
    if (it == tags.end()) {
      std::string known;
      for (const auto& kv : tags)
        known += (known.empty() ? "" : ", ") + kv.first;
      throw ConfigError(where + ": vertex tag '" + *vertex +
                        "' does not resolve (known tags: " + known + ")");
    }
    return it->second;
  }
};

// -------------------------------------------------------------- diagnostics

struct ChiParams {
  std::vector<std::string> base;  // empty = all base points
  double l = 0.0, k = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  int count = 0;
  double slack = kChiSlack;
  std::optional<int> expect_max_violations;
};

struct RoundnessParams {
  std::vector<std::string> base;
  double h_lo = 0.0, h_hi = 0.0;
  int count = 0;
  double beta = 0.5;
  double slope_tol = kSlopeTol;
  double ecc_cap = kEccCap;
  int min_cells = 30;
  double saturation_fraction = 0.1;
  std::optional<std::string> expect_verdict;
  std::optional<double> expect_slope_major, expect_slope_minor;
  std::optional<double> expect_max_ecc;
  std::optional<double> expect_major_dir_deg;
  double orient_tol_deg = 10.0;
};

struct SectionsParams {
  std::vector<std::string> base;
  double h_lo = 0.0, h_hi = 0.0;
  int count = 0;
  double fit_lo = 0.0, fit_hi = std::numeric_limits<double>::infinity();
  double slope_tol = kSlopeTol;
  std::optional<double> expect_slope_u, expect_slope_v;
};

struct ClassifyParams {
  std::string source_vertex, target_vertex;
  std::optional<std::string> expect_verdict;
};

struct BlowupParams {
  std::vector<std::string> base;
  double h = 0.0;
  double degree = 2.0;
  double t = 0.5;
  std::optional<double> expect_defect_max;
};

struct ObliquenessParams {
  std::string source_vertex, target_vertex;
  std::optional<double> expect_min_cos;
};

struct DiagnosticSpec {
  std::string kind;
  std::variant<ChiParams, RoundnessParams, SectionsParams, ClassifyParams,
               BlowupParams, ObliquenessParams>
      params;
};

namespace labdetail {

inline void parse_ladder(const json& j, const char* key,
                         const std::string& where, double& lo, double& hi,
                         int& count, int min_count) {
  const json& v = j.at(key);
  std::string at = where + "." + key;
  require_keys(v, at, {"lo", "hi", "count"});
  lo = num_at(v, "lo", at);
  hi = num_at(v, "hi", at);
  count = static_cast<int>(int_at(v, "count", at));
  if (!(lo > 0.0) || !(hi > lo))
    throw ConfigError(at + ": need 0 < lo < hi");
  if (count < min_count || count > 4096)
    throw ConfigError(at + ": count must lie in [" +
                      std::to_string(min_count) + ", 4096]");
}

inline void check_roundness_verdict(const std::string& v,
                                    const std::string& where) {
  if (v != "ROUND" && v != "NON_ROUND" && v != "INCONCLUSIVE")
    throw ConfigError(where + ": expected ROUND, NON_ROUND or INCONCLUSIVE");
}

inline void check_cone_verdict(const std::string& v, const std::string& where) {
  static const char* names[] = {"HalfSpace", "Acute", "RightAngle", "Obtuse",
                                "NoHomogeneousMap"};
  for (const char* n : names)
    if (v == n) return;
  throw ConfigError(where + ": unknown cone verdict '" + v + "'");
}

}  // namespace labdetail

inline DiagnosticSpec parse_diagnostic(const json& j, const std::string& where) {
  using namespace labdetail;
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError(where + ": expected an object with a 'kind' key");
  DiagnosticSpec d;
  d.kind = str_at(j, "kind", where);
  if (d.kind == "chi") {
    require_keys(j, where, {"kind", "radii"},
                 {"base", "l", "k", "slack", "expect_max_violations"});
    ChiParams p;
    p.base = str_list_or(j, "base", where);
    p.l = num_or(j, "l", 0.0, where);
    p.k = num_or(j, "k", 0.0, where);
    p.slack = num_or(j, "slack", kChiSlack, where);
    parse_ladder(j, "radii", where, p.r_lo, p.r_hi, p.count, 2);
    if (p.l < 0.0 || p.k < 0.0)
      throw ConfigError(where + ": l and k must be >= 0");
    if (j.contains("expect_max_violations"))
      p.expect_max_violations =
          static_cast<int>(int_at(j, "expect_max_violations", where));
    d.params = p;
  } else if (d.kind == "roundness") {
    require_keys(j, where, {"kind", "heights"},
                 {"base", "beta", "slope_tol", "ecc_cap", "min_cells",
                  "saturation_fraction", "expect_verdict",
                  "expect_slope_major", "expect_slope_minor", "expect_max_ecc",
                  "expect_major_dir_deg", "orient_tol_deg"});
    RoundnessParams p;
    p.base = str_list_or(j, "base", where);
    parse_ladder(j, "heights", where, p.h_lo, p.h_hi, p.count, 2);
    p.beta = num_or(j, "beta", 0.5, where);
    p.slope_tol = num_or(j, "slope_tol", kSlopeTol, where);
    p.ecc_cap = num_or(j, "ecc_cap", kEccCap, where);
    p.min_cells = static_cast<int>(int_or(j, "min_cells", 30, where));
    p.saturation_fraction = num_or(j, "saturation_fraction", 0.1, where);
    if (j.contains("expect_verdict")) {
      p.expect_verdict = str_at(j, "expect_verdict", where);
      check_roundness_verdict(*p.expect_verdict, where + ".expect_verdict");
    }
    if (j.contains("expect_slope_major"))
      p.expect_slope_major = num_at(j, "expect_slope_major", where);
    if (j.contains("expect_slope_minor"))
      p.expect_slope_minor = num_at(j, "expect_slope_minor", where);
    if (j.contains("expect_max_ecc"))
      p.expect_max_ecc = num_at(j, "expect_max_ecc", where);
    if (j.contains("expect_major_dir_deg"))
      p.expect_major_dir_deg = num_at(j, "expect_major_dir_deg", where);
    p.orient_tol_deg = num_or(j, "orient_tol_deg", 10.0, where);
    d.params = p;
  } else if (d.kind == "sections") {
    require_keys(j, where, {"kind", "heights"},
                 {"base", "fit_lo", "fit_hi", "slope_tol", "expect_slope_u",
                  "expect_slope_v"});
    SectionsParams p;
    p.base = str_list_or(j, "base", where);
    parse_ladder(j, "heights", where, p.h_lo, p.h_hi, p.count, 2);
    p.fit_lo = num_or(j, "fit_lo", 0.0, where);
    p.fit_hi = num_or(j, "fit_hi",
                      std::numeric_limits<double>::infinity(), where);
    p.slope_tol = num_or(j, "slope_tol", kSlopeTol, where);
    if (j.contains("expect_slope_u"))
      p.expect_slope_u = num_at(j, "expect_slope_u", where);
    if (j.contains("expect_slope_v"))
      p.expect_slope_v = num_at(j, "expect_slope_v", where);
    d.params = p;
  } else if (d.kind == "classify") {
    require_keys(j, where, {"kind", "source_vertex", "target_vertex"},
                 {"expect_verdict"});
    ClassifyParams p;
    p.source_vertex = str_at(j, "source_vertex", where);
    p.target_vertex = str_at(j, "target_vertex", where);
    if (j.contains("expect_verdict")) {
      p.expect_verdict = str_at(j, "expect_verdict", where);
      check_cone_verdict(*p.expect_verdict, where + ".expect_verdict");
    }
    d.params = p;
  } else if (d.kind == "blowup") {
    require_keys(j, where, {"kind", "h"},
                 {"base", "degree", "t", "expect_defect_max"});
    BlowupParams p;
    p.base = str_list_or(j, "base", where);
    p.h = num_at(j, "h", where);
    p.degree = num_or(j, "degree", 2.0, where);
    p.t = num_or(j, "t", 0.5, where);
    if (!(p.h > 0.0)) throw ConfigError(where + ".h: must be > 0");
    if (!(p.t > 0.0) || p.t >= 1.0)
      throw ConfigError(where + ".t: must lie in (0, 1)");
    if (j.contains("expect_defect_max"))
      p.expect_defect_max = num_at(j, "expect_defect_max", where);
    d.params = p;
  } else if (d.kind == "obliqueness") {
    require_keys(j, where, {"kind", "source_vertex", "target_vertex"},
                 {"expect_min_cos"});
    ObliquenessParams p;
    p.source_vertex = str_at(j, "source_vertex", where);
    p.target_vertex = str_at(j, "target_vertex", where);
    if (j.contains("expect_min_cos"))
      p.expect_min_cos = num_at(j, "expect_min_cos", where);
    d.params = p;
  } else {
    throw ConfigError(where + ".kind: unknown diagnostic '" + d.kind +
                      "' (chi, sections, roundness, classify, blowup, "
                      "obliqueness)");
  }
  return d;
}

inline json diagnostic_to_json(const DiagnosticSpec& d) {
  json j;
  j["kind"] = d.kind;
  auto ladder = [](double lo, double hi, int count) {
    json v;
    v["lo"] = lo;
    v["hi"] = hi;
    v["count"] = count;
    return v;
  };
  if (const auto* p = std::get_if<ChiParams>(&d.params)) {
    if (!p->base.empty()) j["base"] = p->base;
    j["l"] = p->l;
    j["k"] = p->k;
    j["radii"] = ladder(p->r_lo, p->r_hi, p->count);
    j["slack"] = p->slack;
    if (p->expect_max_violations)
      j["expect_max_violations"] = *p->expect_max_violations;
  } else if (const auto* p = std::get_if<RoundnessParams>(&d.params)) {
    if (!p->base.empty()) j["base"] = p->base;
    j["heights"] = ladder(p->h_lo, p->h_hi, p->count);
    j["beta"] = p->beta;
    j["slope_tol"] = p->slope_tol;
    j["ecc_cap"] = p->ecc_cap;
    j["min_cells"] = p->min_cells;
    j["saturation_fraction"] = p->saturation_fraction;
    if (p->expect_verdict) j["expect_verdict"] = *p->expect_verdict;
    if (p->expect_slope_major) j["expect_slope_major"] = *p->expect_slope_major;
    if (p->expect_slope_minor) j["expect_slope_minor"] = *p->expect_slope_minor;
    if (p->expect_max_ecc) j["expect_max_ecc"] = *p->expect_max_ecc;
    if (p->expect_major_dir_deg) {
      j["expect_major_dir_deg"] = *p->expect_major_dir_deg;
      j["orient_tol_deg"] = p->orient_tol_deg;
    }
  } else if (const auto* p = std::get_if<SectionsParams>(&d.params)) {
    if (!p->base.empty()) j["base"] = p->base;
    j["heights"] = ladder(p->h_lo, p->h_hi, p->count);
    j["fit_lo"] = p->fit_lo;
    if (std::isfinite(p->fit_hi)) j["fit_hi"] = p->fit_hi;
    j["slope_tol"] = p->slope_tol;
    if (p->expect_slope_u) j["expect_slope_u"] = *p->expect_slope_u;
    if (p->expect_slope_v) j["expect_slope_v"] = *p->expect_slope_v;
  } else if (const auto* p = std::get_if<ClassifyParams>(&d.params)) {
    j["source_vertex"] = p->source_vertex;
    j["target_vertex"] = p->target_vertex;
    if (p->expect_verdict) j["expect_verdict"] = *p->expect_verdict;
  } else if (const auto* p = std::get_if<BlowupParams>(&d.params)) {
    if (!p->base.empty()) j["base"] = p->base;
    j["h"] = p->h;
    j["degree"] = p->degree;
    j["t"] = p->t;
    if (p->expect_defect_max) j["expect_defect_max"] = *p->expect_defect_max;
  } else if (const auto* p = std::get_if<ObliquenessParams>(&d.params)) {
    j["source_vertex"] = p->source_vertex;
    j["target_vertex"] = p->target_vertex;
    if (p->expect_min_cos) j["expect_min_cos"] = *p->expect_min_cos;
  }
  return j;
}

// ------------------------------------------------------------------ scenario

struct Scenario {
  std::string name;
  long long n_sites = 0;
  unsigned long long seed = 0;
  PolygonSpec source_spec, target_spec;
  DensitySpec source_density_spec, target_density_spec;
  std::vector<BasePointSpec> base_points;
  std::vector<DiagnosticSpec> diagnostics;

  static Scenario parse(const json& j) {
    using namespace labdetail;
    require_keys(j, "scenario",
                 {"name", "n_sites", "seed", "source", "source_density",
                  "target", "target_density", "base_points", "diagnostics"});
    Scenario sc;
    sc.name = str_at(j, "name", "scenario");
    check_identifier(sc.name, "scenario.name");
    sc.n_sites = int_at(j, "n_sites", "scenario");
    if (sc.n_sites < 1 || sc.n_sites > 200000)
      throw ConfigError("scenario.n_sites: must lie in [1, 200000]");
    long long seed = int_at(j, "seed", "scenario");
    if (seed < 0) throw ConfigError("scenario.seed: must be >= 0");
    sc.seed = static_cast<unsigned long long>(seed);
    sc.source_spec = PolygonSpec::parse(j.at("source"), "scenario.source");
    sc.target_spec = PolygonSpec::parse(j.at("target"), "scenario.target");
    sc.source_density_spec =
        DensitySpec::parse(j.at("source_density"), "scenario.source_density");
    sc.target_density_spec =
        DensitySpec::parse(j.at("target_density"), "scenario.target_density");

    const json& bps = j.at("base_points");
    if (!bps.is_array() || bps.empty())
      throw ConfigError("scenario.base_points: expected a non-empty array");
    Polygon src = sc.source_spec.build();
    auto stags = sc.source_spec.tags();
    std::set<std::string> labels;
    for (std::size_t i = 0; i < bps.size(); ++i) {
      std::string at = "scenario.base_points[" + std::to_string(i) + "]";
      BasePointSpec bp = BasePointSpec::parse(bps[i], at);
      if (!labels.insert(bp.label).second)
        throw ConfigError(at + ": duplicate label '" + bp.label + "'");
      Vec2 x0 = bp.resolve(stags, at);
      if (!src.contains(x0, 1e-7 * (1.0 + src.diameter())))
        throw ConfigError(at + ": point (" + fmt17(x0.x) + ", " + fmt17(x0.y) +
                          ") lies outside the source polygon");
      sc.base_points.push_back(std::move(bp));
    }

    const json& dgs = j.at("diagnostics");
    if (!dgs.is_array() || dgs.empty())
      throw ConfigError("scenario.diagnostics: expected a non-empty array");
    auto ttags = sc.target_spec.tags();
    Polygon tgt = sc.target_spec.build();
    auto require_polygon_vertex = [](const Polygon& p, Vec2 v,
                                     const std::string& at) {
      double tol = kTolGeom * (1.0 + p.diameter());
      for (std::size_t i = 0; i < p.size(); ++i)
        if (dist(p[i], v) <= tol) return;
      throw ConfigError(at + ": tag does not name a polygon vertex");
    };
    for (std::size_t i = 0; i < dgs.size(); ++i) {
      std::string at = "scenario.diagnostics[" + std::to_string(i) + "]";
      DiagnosticSpec d = parse_diagnostic(dgs[i], at);
      // Base labels referenced by the diagnostic must exist.
      const std::vector<std::string>* refs = nullptr;
      if (const auto* p = std::get_if<ChiParams>(&d.params)) refs = &p->base;
      if (const auto* p = std::get_if<RoundnessParams>(&d.params))
        refs = &p->base;
      if (const auto* p = std::get_if<SectionsParams>(&d.params))
        refs = &p->base;
      if (const auto* p = std::get_if<BlowupParams>(&d.params)) refs = &p->base;
      if (refs)
        for (const std::string& b : *refs)
          if (!labels.count(b))
            throw ConfigError(at + ".base: unknown base point label '" + b +
                              "'");
      // Vertex tags referenced by corner diagnostics must name real vertices.
      auto check_pair = [&](const std::string& sv, const std::string& tv) {
        auto sit = stags.find(sv);
        if (sit == stags.end())
          throw ConfigError(at + ".source_vertex: tag '" + sv +
                            "' does not resolve");
        auto tit = ttags.find(tv);
        if (tit == ttags.end())
          throw ConfigError(at + ".target_vertex: tag '" + tv +
                            "' does not resolve");
        require_polygon_vertex(src, sit->second, at + ".source_vertex");
        require_polygon_vertex(tgt, tit->second, at + ".target_vertex");
      };
      if (const auto* p = std::get_if<ClassifyParams>(&d.params))
        check_pair(p->source_vertex, p->target_vertex);
      if (const auto* p = std::get_if<ObliquenessParams>(&d.params))
        check_pair(p->source_vertex, p->target_vertex);
      sc.diagnostics.push_back(std::move(d));
    }
    return sc;
  }

  static Scenario from_string(const std::string& text,
                              const std::string& source_name) {
    json j;
    try {
      j = json::parse(text, nullptr, /*allow_exceptions=*/true,
                      /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      // Convert the byte offset into a line/column pair for the message.
      std::size_t line = 1, col = 1;
      for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
      throw ConfigError(source_name + ": parse error at line " +
                        std::to_string(line) + ", column " +
                        std::to_string(col) + ": " + e.what());
    }
    try {
      return parse(j);
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ": " + e.what());
    }
  }

  json to_json() const {
    json j;
    j["name"] = name;
    j["n_sites"] = n_sites;
    j["seed"] = seed;
    j["source"] = source_spec.to_json();
    j["source_density"] = source_density_spec.to_json();
    j["target"] = target_spec.to_json();
    j["target_density"] = target_density_spec.to_json();
    json bps = json::array();
    for (const auto& b : base_points) bps.push_back(b.to_json());
    j["base_points"] = bps;
    json dgs = json::array();
    for (const auto& d : diagnostics) dgs.push_back(diagnostic_to_json(d));
    j["diagnostics"] = dgs;
    return j;
  }

  // Stable content hash of the resolved configuration (keys serialize in
  // sorted order, doubles round-trip exactly).
  std::string hash() const { return labdetail::fnv1a_hex(to_json().dump()); }
};

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return Scenario::from_string(buf.str(), path);
}

inline std::vector<Scenario> load_scenario_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw ConfigError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ConfigError("no *.json scenario files in " + dir);
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const std::string& f : files) out.push_back(load_scenario_file(f));
  return out;
}

// -------------------------------------------------------------------- runner

struct RunOptions {
  std::string out_dir = "otlab_out";
  std::optional<unsigned long long> seed_override;
  std::optional<double> slack_override;
  bool quiet = false;
  bool write_files = true;
};

struct DiagnosticResult {
  std::string kind;
  std::string base_label;  // empty for classify / obliqueness
  std::string status;      // PASS | FAIL | FAILED
  std::string detail;
  std::string csv_name;
  std::string csv;
};

struct Report {
  std::string scenario_name;
  std::string scenario_hash;
  json scenario_json;
  long long n_sites = 0;
  unsigned long long seed = 0;
  int solver_iterations = 0;
  double solver_residual = 0.0;
  bool solver_converged = false;
  double mass_rescale_applied = 1.0;
  std::vector<DiagnosticResult> rows;
  std::shared_ptr<TransportPlan> plan;  // in-memory only

  bool all_pass() const {
    for (const auto& r : rows)
      if (r.status != "PASS") return false;
    return !rows.empty();
  }

  std::string text() const {
    std::ostringstream os;
    os << "scenario " << scenario_name << "\n"
       << "  hash " << scenario_hash << "\n"
       << "  sites " << n_sites << "  seed " << seed << "\n"
       << "  solver iterations " << solver_iterations << "  residual "
       << fmt17(solver_residual) << "  converged "
       << (solver_converged ? "yes" : "no") << "\n"
       << "  target density constant rescaled by "
       << fmt17(mass_rescale_applied) << " for mass balance\n";
    for (const auto& r : rows) {
      os << "  [" << r.status << "] " << r.kind;
      if (!r.base_label.empty()) os << " @ " << r.base_label;
      os << " - " << r.detail << "\n";
    }
    os << "  result: " << (all_pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
  }

  json summary_json() const {
    json j;
    j["name"] = scenario_name;
    j["hash"] = scenario_hash;
    j["n_sites"] = n_sites;
    j["seed"] = seed;
    j["solver_iterations"] = solver_iterations;
    j["solver_residual"] = solver_residual;
    j["solver_converged"] = solver_converged;
    j["mass_rescale"] = mass_rescale_applied;
    j["status"] = all_pass() ? "PASS" : "FAIL";
    json rws = json::array();
    for (const auto& r : rows) {
      json row;
      row["kind"] = r.kind;
      if (!r.base_label.empty()) row["base"] = r.base_label;
      row["status"] = r.status;
      row["detail"] = r.detail;
      if (!r.csv_name.empty()) row["csv"] = r.csv_name;
      rws.push_back(row);
    }
    j["rows"] = rws;
    return j;
  }
};

namespace labdetail {

inline std::string unique_csv_name(std::set<std::string>& used,
                                   const std::string& stem) {
  std::string name = stem + ".csv";
  int suffix = 2;
  while (!used.insert(name).second)
    name = stem + "_" + std::to_string(suffix++) + ".csv";
  return name;
}

inline const BasePointSpec& find_base(const Scenario& sc,
                                      const std::string& label) {
  for (const auto& b : sc.base_points)
    if (b.label == label) return b;
  throw ConfigError("unknown base point label: " + label);  // unreachable
}

inline std::vector<std::string> base_labels_or_all(
    const Scenario& sc, const std::vector<std::string>& base) {
  if (!base.empty()) return base;
  std::vector<std::string> all;
  for (const auto& b : sc.base_points) all.push_back(b.label);
  return all;
}

inline std::size_t polygon_vertex_index(const Polygon& p, Vec2 v) {
  double tol = kTolGeom * (1.0 + p.diameter());
  for (std::size_t i = 0; i < p.size(); ++i)
    if (dist(p[i], v) <= tol) return i;
  throw NotAVertex("tagged point is not a polygon vertex");
}

inline double angle_deg_mod180(Vec2 d) {
  double a = std::atan2(d.y, d.x) * 180.0 / kPi;
  a = std::fmod(a, 180.0);
  if (a < 0.0) a += 180.0;
  return a;
}

inline double angular_diff_deg(double a, double b) {
  double d = std::abs(a - b);
  d = std::fmod(d, 180.0);
  return std::min(d, 180.0 - d);
}

struct ExpectationLedger {
  int checked = 0;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    ++checked;
    if (!ok) failures.push_back(what);
  }

  // PASS when every stated expectation holds (an empty ledger passes: the
  // diagnostic ran and its payload stands on its own).
  std::string status() const { return failures.empty() ? "PASS" : "FAIL"; }
  std::string annotate(std::string detail) const {
    if (checked == 0) detail += " (no assertions)";
    for (const std::string& f : failures) detail += "; EXPECT " + f;
    return detail;
  }
};

}  // namespace labdetail

// Executes every diagnostic of the scenario against an already-solved plan.
// Failures inside one diagnostic become FAILED rows; the batch continues.
inline void run_diagnostics(const Scenario& sc, const TransportPlan& plan,
                            const Polygon& source, const Polygon& target,
                            const RunOptions& opt, Report& rep,
                            const std::string& only_kind = "") {
  using namespace labdetail;
  auto stags = sc.source_spec.tags();
  auto ttags = sc.target_spec.tags();
  const Density& g = plan.source_density;
  std::set<std::string> used_names;

  auto push_failed = [&](const std::string& kind, const std::string& base,
                         const std::string& msg) {
    rep.rows.push_back({kind, base, "FAILED", msg, "", ""});
  };

  for (const auto& diag : sc.diagnostics) {
    if (!only_kind.empty() && diag.kind != only_kind) continue;

    if (const auto* p = std::get_if<ChiParams>(&diag.params)) {
      for (const std::string& label : base_labels_or_all(sc, p->base)) {
        try {
          const BasePointSpec& bspec = find_base(sc, label);
          Vec2 x0 = bspec.resolve(stags, "base_points");
          BasePoint bp = base_point(plan, x0, bspec.pin_origin);
          std::vector<double> radii = geometric_ladder(p->r_lo, p->r_hi,
                                                       p->count);
          double slack = opt.slack_override.value_or(p->slack);
          MonotonicityTrace tr = chi_trace(plan, bp, g, p->l, p->k, radii,
                                           slack);
          std::ostringstream os;
          write_csv(os, tr, rep.scenario_hash);
          ExpectationLedger ex;
          if (p->expect_max_violations)
            ex.require(static_cast<int>(tr.violations.size()) <=
                           *p->expect_max_violations,
                       "violations <= " +
                           std::to_string(*p->expect_max_violations));
          std::string detail = "violations=" +
                               std::to_string(tr.violations.size()) +
                               " over " + std::to_string(radii.size()) +
                               " radii, slack=" + fmt17(slack);
          rep.rows.push_back({diag.kind, label, ex.status(),
                              ex.annotate(detail),
                              unique_csv_name(used_names,
                                              sc.name + "_chi_" + label),
                              os.str()});
        } catch (const std::exception& e) {
          push_failed(diag.kind, label, e.what());
        }
      }
    } else if (const auto* p = std::get_if<RoundnessParams>(&diag.params)) {
      for (const std::string& label : base_labels_or_all(sc, p->base)) {
        try {
          const BasePointSpec& bspec = find_base(sc, label);
          Vec2 x0 = bspec.resolve(stags, "base_points");
          RoundnessOptions ropts;
          ropts.beta = p->beta;
          ropts.slope_tol = p->slope_tol;
          ropts.ecc_cap = p->ecc_cap;
          ropts.min_cells = static_cast<std::size_t>(p->min_cells);
          ropts.saturation_fraction = p->saturation_fraction;
          std::vector<double> heights = geometric_ladder(p->h_lo, p->h_hi,
                                                         p->count);
          SectionProfile prof = roundness_profile(plan, x0, heights, ropts);
          std::ostringstream os;
          write_csv(os, prof, rep.scenario_hash);
          ExpectationLedger ex;
          if (p->expect_verdict)
            ex.require(to_string(prof.verdict) == *p->expect_verdict,
                       "verdict == " + *p->expect_verdict);
          if (p->expect_slope_major)
            ex.require(std::abs(prof.slope_major.slope -
                                *p->expect_slope_major) <= p->slope_tol,
                       "slope_major within " + fmt17(p->slope_tol) + " of " +
                           fmt17(*p->expect_slope_major));
          if (p->expect_slope_minor)
            ex.require(std::abs(prof.slope_minor.slope -
                                *p->expect_slope_minor) <= p->slope_tol,
                       "slope_minor within " + fmt17(p->slope_tol) + " of " +
                           fmt17(*p->expect_slope_minor));
          double ecc_max = 0.0;
          std::optional<std::size_t> first_trusted;
          for (std::size_t i = 0; i < prof.heights.size(); ++i)
            if (prof.trusted[i]) {
              if (!first_trusted) first_trusted = i;
              ecc_max = std::max(ecc_max, prof.eccentricities[i]);
            }
          if (p->expect_max_ecc)
            ex.require(ecc_max <= *p->expect_max_ecc,
                       "trusted eccentricity <= " + fmt17(*p->expect_max_ecc));
          if (p->expect_major_dir_deg) {
            double got = first_trusted
                             ? angle_deg_mod180(
                                   prof.ellipses[*first_trusted].axes()
                                       .major_dir)
                             : std::numeric_limits<double>::quiet_NaN();
            ex.require(first_trusted &&
                           angular_diff_deg(got, *p->expect_major_dir_deg) <=
                               p->orient_tol_deg,
                       "major axis within " + fmt17(p->orient_tol_deg) +
                           " deg of " + fmt17(*p->expect_major_dir_deg));
          }
          std::string detail = std::string("verdict=") +
                               to_string(prof.verdict) + " slope_major=" +
                               fmt17(prof.slope_major.slope) +
                               " slope_minor=" +
                               fmt17(prof.slope_minor.slope) +
                               " trusted_ecc_max=" + fmt17(ecc_max);
          rep.rows.push_back({diag.kind, label, ex.status(),
                              ex.annotate(detail),
                              unique_csv_name(used_names, sc.name +
                                              "_roundness_" + label),
                              os.str()});
        } catch (const std::exception& e) {
          push_failed(diag.kind, label, e.what());
        }
      }
    } else if (const auto* p = std::get_if<SectionsParams>(&diag.params)) {
      for (const std::string& label : base_labels_or_all(sc, p->base)) {
        try {
          const BasePointSpec& bspec = find_base(sc, label);
          Vec2 x0 = bspec.resolve(stags, "base_points");
          BasePoint bp = base_point(plan, x0, bspec.pin_origin);
          std::vector<double> heights = geometric_ladder(p->h_lo, p->h_hi,
                                                         p->count);
          std::vector<double> hs_u, ax_u, hs_v, ax_v;
          struct Row {
            double h, area, maj, min, ecc;
            bool has_proxy;
            double pmaj, pmin;
          };
          std::vector<Row> rows;
          for (double h : heights) {
            Section s = section(plan, bp, h);
            Row row{h, area_or_zero(s.poly), 0.0, 0.0, 0.0, false, 0.0, 0.0};
            bool axes_ok = false;
            try {
              Ellipse e = lowner_ellipse(s.poly);
              auto ax = e.axes();
              row.maj = ax.major;
              row.min = ax.minor;
              row.ecc = e.eccentricity();
              axes_ok = true;
            } catch (const Error&) {
            }
            if (axes_ok && !s.saturated) {
              hs_u.push_back(h);
              ax_u.push_back(std::sqrt(row.maj * row.min));
            }
            try {
              Polygon proxy = v_section_proxy(plan, bp, h);
              Ellipse pe = lowner_ellipse(proxy);
              auto pax = pe.axes();
              row.has_proxy = true;
              row.pmaj = pax.major;
              row.pmin = pax.minor;
              hs_v.push_back(h);
              ax_v.push_back(std::sqrt(pax.major * pax.minor));
            } catch (const Error&) {
            }
            rows.push_back(row);
          }
          FitResult fit_u = exponent_fit(hs_u, ax_u, p->fit_lo, p->fit_hi);
          FitResult fit_v = exponent_fit(hs_v, ax_v, p->fit_lo, p->fit_hi);
          std::ostringstream os;
          os << "# scenario_hash: " << rep.scenario_hash << "\n"
             << "# kind: sections slope_u=" << fmt17(fit_u.slope)
             << " slope_v=" << fmt17(fit_v.slope) << " samples_u="
             << fit_u.samples << " samples_v=" << fit_v.samples << "\n";
          for (const Row& r : rows)
            if (r.has_proxy)
              os << "# vproxy: h=" << fmt17(r.h) << " major=" << fmt17(r.pmaj)
                 << " minor=" << fmt17(r.pmin) << "\n";
          os << "h_or_r,mass,chi,axis_major,axis_minor,eccentricity\n";
          for (const Row& r : rows)
            os << fmt17(r.h) << ',' << fmt17(r.area) << ",0,"
               << fmt17(r.maj) << ',' << fmt17(r.min) << ',' << fmt17(r.ecc)
               << "\n";
          ExpectationLedger ex;
          if (p->expect_slope_u)
            ex.require(std::abs(fit_u.slope - *p->expect_slope_u) <=
                           p->slope_tol,
                       "slope_u within " + fmt17(p->slope_tol) + " of " +
                           fmt17(*p->expect_slope_u));
          if (p->expect_slope_v)
            ex.require(std::abs(fit_v.slope - *p->expect_slope_v) <=
                           p->slope_tol,
                       "slope_v within " + fmt17(p->slope_tol) + " of " +
                           fmt17(*p->expect_slope_v));
          std::string detail = "slope_u=" + fmt17(fit_u.slope) + " slope_v=" +
                               fmt17(fit_v.slope);
          rep.rows.push_back({diag.kind, label, ex.status(),
                              ex.annotate(detail),
                              unique_csv_name(used_names, sc.name +
                                              "_sections_" + label),
                              os.str()});
        } catch (const std::exception& e) {
          push_failed(diag.kind, label, e.what());
        }
      }
    } else if (const auto* p = std::get_if<ClassifyParams>(&diag.params)) {
      try {
        Vec2 sv = stags.at(p->source_vertex);
        Vec2 tv = ttags.at(p->target_vertex);
        Sector cs = tangent_cone(source, polygon_vertex_index(source, sv));
        Sector ct = tangent_cone(target, polygon_vertex_index(target, tv));
        Classification cl = classify(ConePair(cs, ct));
        std::ostringstream os;
        os << "# scenario_hash: " << rep.scenario_hash << "\n"
           << "# kind: classify\n"
           << "verdict,family_dimension,q_a,q_b,q_c,q_d\n";
        Mat2 q = cl.witness ? cl.witness->Q : Mat2{0.0, 0.0, 0.0, 0.0};
        os << to_string(cl.verdict) << ',' << cl.family_dimension << ','
           << fmt17(q.a) << ',' << fmt17(q.b) << ',' << fmt17(q.c) << ','
           << fmt17(q.d) << "\n";
        ExpectationLedger ex;
        if (p->expect_verdict)
          ex.require(to_string(cl.verdict) == *p->expect_verdict,
                     "verdict == " + *p->expect_verdict);
        std::string detail = std::string("verdict=") + to_string(cl.verdict) +
                             " family_dimension=" +
                             std::to_string(cl.family_dimension);
        rep.rows.push_back({diag.kind, "", ex.status(), ex.annotate(detail),
                            unique_csv_name(used_names,
                                            sc.name + "_classify"),
                            os.str()});
      } catch (const std::exception& e) {
        push_failed(diag.kind, "", e.what());
      }
    } else if (const auto* p = std::get_if<BlowupParams>(&diag.params)) {
      for (const std::string& label : base_labels_or_all(sc, p->base)) {
        try {
          const BasePointSpec& bspec = find_base(sc, label);
          Vec2 x0 = bspec.resolve(stags, "base_points");
          BlowupFrame frame = blowup_rescale(plan, x0, p->h);
          double defect = frame.homogeneity_defect(p->t, p->degree);
          Ellipse e = lowner_ellipse(frame.rescaled_section);
          auto ax = e.axes();
          std::ostringstream os;
          os << "# scenario_hash: " << rep.scenario_hash << "\n"
             << "# kind: blowup degree=" << fmt17(p->degree) << " t="
             << fmt17(p->t) << "\n"
             << "h,defect,axis_major,axis_minor,eccentricity\n"
             << fmt17(p->h) << ',' << fmt17(defect) << ',' << fmt17(ax.major)
             << ',' << fmt17(ax.minor) << ',' << fmt17(e.eccentricity())
             << "\n";
          ExpectationLedger ex;
          if (p->expect_defect_max)
            ex.require(defect <= *p->expect_defect_max,
                       "defect <= " + fmt17(*p->expect_defect_max));
          std::string detail = "defect=" + fmt17(defect) + " at h=" +
                               fmt17(p->h);
          rep.rows.push_back({diag.kind, label, ex.status(),
                              ex.annotate(detail),
                              unique_csv_name(used_names, sc.name +
                                              "_blowup_" + label),
                              os.str()});
        } catch (const std::exception& e) {
          push_failed(diag.kind, label, e.what());
        }
      }
    } else if (const auto* p = std::get_if<ObliquenessParams>(&diag.params)) {
      try {
        Vec2 sv = stags.at(p->source_vertex);
        Vec2 tv = ttags.at(p->target_vertex);
        double cosv = obliqueness_check(source, sv, target, tv);
        std::ostringstream os;
        os << "# scenario_hash: " << rep.scenario_hash << "\n"
           << "# kind: obliqueness\n"
           << "cos_angle\n"
           << fmt17(cosv) << "\n";
        ExpectationLedger ex;
        if (p->expect_min_cos)
          ex.require(cosv >= *p->expect_min_cos,
                     "cos >= " + fmt17(*p->expect_min_cos));
        std::string detail = "cos=" + fmt17(cosv);
        rep.rows.push_back({diag.kind, "", ex.status(), ex.annotate(detail),
                            unique_csv_name(used_names,
                                            sc.name + "_obliqueness"),
                            os.str()});
      } catch (const std::exception& e) {
        push_failed(diag.kind, "", e.what());
      }
    }
  }
}

inline json run_bundle(const Report& rep) {
  json b;
  b["scenario"] = rep.scenario_json;
  b["plan"] = plan_to_json(*rep.plan);
  return b;
}

inline void write_outputs(const Report& rep, const RunOptions& opt) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw ConfigError("cannot create out-dir: " + opt.out_dir);
  auto write_file = [&](const std::string& name, const std::string& body) {
    std::string path = (fs::path(opt.out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << body;
  };
  for (const auto& r : rep.rows)
    if (!r.csv_name.empty()) write_file(r.csv_name, r.csv);
  if (rep.plan) write_file(rep.scenario_name + "_run.json",
                           run_bundle(rep).dump(2) + "\n");
  write_file(rep.scenario_name + "_report.txt", rep.text());
}

// Sample, solve, diagnose, persist.  Solver and diagnostic failures land in
// the report as FAILED rows; only configuration/IO problems throw.
inline Report run(const Scenario& sc, const RunOptions& opt = {}) {
  Report rep;
  rep.scenario_name = sc.name;
  rep.scenario_json = sc.to_json();
  rep.scenario_hash = sc.hash();
  rep.n_sites = sc.n_sites;
  rep.seed = opt.seed_override.value_or(sc.seed);
  Polygon src = sc.source_spec.build();
  Polygon tgt = sc.target_spec.build();
  try {
    Density g = sc.source_density_spec.build();
    Density gp = sc.target_density_spec.build();
    double mu_src = integrate(g, src);
    double mu_tgt = integrate(gp, tgt);
    if (!(mu_tgt > 0.0))
      throw ConfigError("target measure vanishes on the target polygon");
    double factor = mu_src / mu_tgt;
    gp = gp.with_constant(gp.constant() * factor);
    rep.mass_rescale_applied = factor;
    bool pin = false;
    for (const auto& b : sc.base_points) pin = pin || b.pin_origin;
    TargetCloud cloud = sample_target(tgt, gp, static_cast<std::size_t>(
                                                   sc.n_sites),
                                      rep.seed, pin);
    TransportPlan plan = solve(src, g, cloud);
    rep.solver_iterations = plan.iterations;
    rep.solver_residual = plan.residual;
    rep.solver_converged = plan.converged;
    rep.plan = std::make_shared<TransportPlan>(std::move(plan));
  } catch (const std::exception& e) {
    rep.rows.push_back({"solve", "", "FAILED", e.what(), "", ""});
    return rep;
  }
  run_diagnostics(sc, *rep.plan, src, tgt, opt, rep);
  if (opt.write_files) write_outputs(rep, opt);
  return rep;
}

// Re-runs diagnostics against a persisted plan bundle without solving.
// Payloads are byte-identical to the original run's.
inline Report replay(const json& bundle, const RunOptions& opt = {},
                     const std::string& only_kind = "") {
  labdetail::require_keys(bundle, "bundle", {"scenario", "plan"});
  Scenario sc = Scenario::parse(bundle.at("scenario"));
  TransportPlan plan = plan_from_json(bundle.at("plan"));
  Report rep;
  rep.scenario_name = sc.name;
  rep.scenario_json = sc.to_json();
  rep.scenario_hash = sc.hash();
  rep.n_sites = sc.n_sites;
  rep.seed = plan.seed;
  rep.solver_iterations = plan.iterations;
  rep.solver_residual = plan.residual;
  rep.solver_converged = plan.converged;
  rep.mass_rescale_applied = plan.mass_rescale;
  rep.plan = std::make_shared<TransportPlan>(std::move(plan));
  Polygon src = sc.source_spec.build();
  Polygon tgt = sc.target_spec.build();
  run_diagnostics(sc, *rep.plan, src, tgt, opt, rep, only_kind);
  if (opt.write_files) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw ConfigError("cannot create out-dir: " + opt.out_dir);
    for (const auto& r : rep.rows)
      if (!r.csv_name.empty()) {
        std::string path = (fs::path(opt.out_dir) / r.csv_name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path);
        out << r.csv;
      }
  }
  return rep;
}

inline Report replay_file(const std::string& bundle_path,
                          const RunOptions& opt = {},
                          const std::string& only_kind = "") {
  std::ifstream in(bundle_path);
  if (!in) throw ConfigError("cannot open bundle: " + bundle_path);
  json b;
  try {
    in >> b;
  } catch (const json::parse_error& e) {
    throw ConfigError(bundle_path + ": " + e.what());
  }
  return replay(b, opt, only_kind);
}

// --------------------------------------------------------------------- suite

struct SuiteResult {
  std::vector<Report> reports;
  bool all_pass = false;
};

inline SuiteResult run_suite(const std::vector<Scenario>& scenarios,
                             const RunOptions& opt = {}, int jobs = 1) {
  if (scenarios.empty())
    throw ConfigError("suite: need at least one scenario");
  std::set<std::string> names;
  for (const auto& sc : scenarios)
    if (!names.insert(sc.name).second)
      throw ConfigError("suite: duplicate scenario name '" + sc.name + "'");

  SuiteResult result;
  result.reports.resize(scenarios.size());
  jobs = std::max(1, jobs);
  if (opt.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (ec) throw ConfigError("cannot create out-dir: " + opt.out_dir);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) break;
      try {
        result.reports[i] = run(scenarios[i], opt);
      } catch (const std::exception& e) {
        Report rep;
        rep.scenario_name = scenarios[i].name;
        rep.scenario_hash = scenarios[i].hash();
        rep.rows.push_back({"run", "", "FAILED", e.what(), "", ""});
        result.reports[i] = std::move(rep);
      }
    }
  };
  if (jobs == 1 || scenarios.size() == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::size_t n_threads = std::min<std::size_t>(jobs, scenarios.size());
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  result.all_pass = true;
  for (const auto& r : result.reports) result.all_pass &= r.all_pass();

  if (opt.write_files) {
    std::ostringstream txt;
    json summary;
    summary["scenarios"] = json::array();
    for (const auto& r : result.reports) {
      txt << r.scenario_name << " " << (r.all_pass() ? "PASS" : "FAIL")
          << "\n";
      summary["scenarios"].push_back(r.summary_json());
    }
    summary["all_pass"] = result.all_pass;
    namespace fs = std::filesystem;
    auto write_file = [&](const std::string& name, const std::string& body) {
      std::string path = (fs::path(opt.out_dir) / name).string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw ConfigError("cannot write " + path);
      out << body;
    };
    write_file("summary.txt", txt.str());
    write_file("summary.json", summary.dump(2) + "\n");
  }
  return result;
}

// ----------------------------------------------------------------- built-ins

// The built-in library: identity and linear maps, the four corner cases at
// polygon corners, degenerate-density targets (k = 1, 2), the mixed
// flat/cone rectangle, and a Holder-perturbed square.  Windows are desk-scale
// calibrated: corner fits start at h = 0.04 (N = 2000 resolution floor) and
// chi ladders start around three cell diameters.
inline std::vector<std::string> builtin_scenario_texts() {
  std::vector<std::string> texts;

  texts.push_back(R"cfg({
  "name": "identity-square",
  "n_sites": 2000,
  "seed": 11,
  "source": {"kind": "square", "lo": -1.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "square", "lo": -1.0, "hi": 1.0},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "interior", "point": [0.2, -0.1]},
    {"label": "corner", "vertex": "sw"}
  ],
  "diagnostics": [
    {"kind": "chi", "radii": {"lo": 0.15, "hi": 0.6, "count": 20},
     "slack": 0.05, "expect_max_violations": 0},
    {"kind": "roundness", "base": ["interior"],
     "heights": {"lo": 0.015, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5, "expect_max_ecc": 1.5},
    {"kind": "blowup", "base": ["interior"], "h": 0.02, "degree": 2.0,
     "expect_defect_max": 0.15}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "linear-map",
  "n_sites": 2000,
  "seed": 23,
  "source": {"kind": "square", "lo": -1.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "rect", "x0": -1.25, "y0": -0.8, "x1": 1.25, "y1": 0.8},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "interior", "point": [0.1, 0.05]}
  ],
  "diagnostics": [
    {"kind": "chi", "radii": {"lo": 0.15, "hi": 0.6, "count": 20},
     "slack": 0.05, "expect_max_violations": 0},
    {"kind": "roundness",
     "heights": {"lo": 0.015, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5, "expect_max_ecc": 1.5}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "right-corner",
  "n_sites": 2000,
  "seed": 4242,
  "source": {"kind": "square", "lo": 0.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "square", "lo": 0.0, "hi": 1.0},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "corner", "vertex": "sw", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "roundness",
     "heights": {"lo": 0.04, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5},
    {"kind": "classify", "source_vertex": "sw", "target_vertex": "sw",
     "expect_verdict": "RightAngle"},
    {"kind": "obliqueness", "source_vertex": "sw", "target_vertex": "sw",
     "expect_min_cos": 0.999}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "acute-corner",
  "n_sites": 2000,
  "seed": 31,
  "source": {"kind": "square", "lo": 0.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "sector", "lo_deg": 20.0, "hi_deg": 70.0,
             "radius": 1.5},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "corner", "vertex": "sw", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "roundness",
     "heights": {"lo": 0.04, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5},
    {"kind": "classify", "source_vertex": "sw", "target_vertex": "apex",
     "expect_verdict": "Acute"}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "obtuse-corner",
  "n_sites": 2000,
  "seed": 37,
  "source": {"kind": "sector", "lo_deg": -60.0, "hi_deg": 60.0,
             "radius": 1.2},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "sector", "lo_deg": -45.0, "hi_deg": 45.0,
             "radius": 1.35},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "apex", "vertex": "apex", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "roundness",
     "heights": {"lo": 0.04, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5},
    {"kind": "classify", "source_vertex": "apex", "target_vertex": "apex",
     "expect_verdict": "Obtuse"},
    {"kind": "obliqueness", "source_vertex": "apex", "target_vertex": "apex",
     "expect_min_cos": 0.9}
  ]
})cfg");

  // The eccentricity of the misaligned-corner sections grows like h^-0.24,
  // so the doubling test needs ~1.4 decades of h; the top sits just under
  // the saturation cap 0.1 * osc(u) ~ 0.089 and the bottom stays above the
  // N = 5000 resolution floor (~110 cells per section).
  texts.push_back(R"cfg({
  "name": "no-homog-corner",
  "n_sites": 5000,
  "seed": 41,
  "source": {"kind": "square", "lo": 0.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "sector", "lo_deg": -30.0, "hi_deg": 60.0,
             "radius": 1.2},
  "target_density": {"kind": "uniform"},
  "base_points": [
    {"label": "corner", "vertex": "sw", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "roundness",
     "heights": {"lo": 0.0024, "hi": 0.08, "count": 12},
     "expect_verdict": "NON_ROUND"},
    {"kind": "classify", "source_vertex": "sw", "target_vertex": "apex",
     "expect_verdict": "NoHomogeneousMap"}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "degenerate-k1",
  "n_sites": 2500,
  "seed": 53,
  "source": {"kind": "sector", "lo_deg": 60.0, "hi_deg": 120.0,
             "radius": 1.4},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "halfplane_cap", "width": 2.0, "height": 0.8},
  "target_density": {"kind": "monomial", "k": 1.0},
  "base_points": [
    {"label": "apex", "vertex": "apex", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "sections",
     "heights": {"lo": 0.02, "hi": 0.12, "count": 10},
     "expect_slope_u": 0.6, "expect_slope_v": 0.4},
    {"kind": "chi", "k": 1.0,
     "radii": {"lo": 0.15, "hi": 0.6, "count": 12},
     "slack": 0.05, "expect_max_violations": 0}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "degenerate-k2",
  "n_sites": 2500,
  "seed": 59,
  "source": {"kind": "sector", "lo_deg": 60.0, "hi_deg": 120.0,
             "radius": 1.4},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "halfplane_cap", "width": 2.0, "height": 0.8},
  "target_density": {"kind": "monomial", "k": 2.0},
  "base_points": [
    {"label": "apex", "vertex": "apex", "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "sections",
     "heights": {"lo": 0.02, "hi": 0.12, "count": 10},
     "fit_lo": 0.04,
     "expect_slope_u": 0.6666666666666666, "expect_slope_v": 0.3333333333333333}
  ]
})cfg");

  // At a flat source-boundary point over the degenerate cap, sections scale
  // h^(1/2) along the edge and h^(2/3) normal to it.  The cap height sets
  // the cone-direction constant (~ density^(1/3)); height 1.6 pushes the
  // axis crossover above the window so the flat direction stays the Loewner
  // major axis throughout, with eccentricity growing like h^(-1/6).
  texts.push_back(R"cfg({
  "name": "mixed-flat-cone",
  "n_sites": 2500,
  "seed": 67,
  "source": {"kind": "rect", "x0": -1.0, "y0": 0.0, "x1": 1.0, "y1": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "halfplane_cap", "width": 2.0, "height": 1.6},
  "target_density": {"kind": "monomial", "k": 1.0},
  "base_points": [
    {"label": "edge", "point": [0.0, 0.0], "pin_origin": true}
  ],
  "diagnostics": [
    {"kind": "roundness",
     "heights": {"lo": 0.03, "hi": 0.12, "count": 8},
     "expect_slope_major": 0.5,
     "expect_slope_minor": 0.6666666666666666,
     "expect_major_dir_deg": 0.0, "orient_tol_deg": 10.0}
  ]
})cfg");

  texts.push_back(R"cfg({
  "name": "holder-square",
  "n_sites": 2000,
  "seed": 71,
  "source": {"kind": "square", "lo": -1.0, "hi": 1.0},
  "source_density": {"kind": "uniform"},
  "target": {"kind": "square", "lo": -1.0, "hi": 1.0},
  "target_density": {"kind": "holder", "base": {"kind": "uniform"},
                     "amplitude": 0.35, "alpha": 0.6},
  "base_points": [
    {"label": "interior", "point": [-0.15, 0.2]}
  ],
  "diagnostics": [
    {"kind": "chi", "radii": {"lo": 0.15, "hi": 0.6, "count": 20},
     "slack": 0.05, "expect_max_violations": 0},
    {"kind": "roundness",
     "heights": {"lo": 0.015, "hi": 0.095, "count": 8},
     "expect_verdict": "ROUND", "expect_slope_major": 0.5,
     "expect_slope_minor": 0.5}
  ]
})cfg");

  return texts;
}

inline std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;
  for (const std::string& t : builtin_scenario_texts())
    out.push_back(Scenario::from_string(t, "builtin"));
  return out;
}

inline std::optional<Scenario> builtin_scenario(const std::string& name) {
  for (Scenario& sc : builtin_scenarios())
    if (sc.name == name) return std::move(sc);
  return std::nullopt;
}

}  // namespace otlab
