#pragma once

/**
 * @file config.hpp
 * @brief JSON run configuration, named regime profiles and pack files.
 *
 * A configuration is built in layers: built-in defaults, then an optional
 * named profile, then the user's file, then command-line overrides. Each
 * layer is a JSON merge patch over the previous one.
 */

#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include <porelbm/engine.hpp>
#include <porelbm/io.hpp>

namespace porelbm {

using Json = nlohmann::json;

/// One row of the regime table: resolution and magic parameter per Re_p range.
struct RegimeProfile {
  const char* name;
  double re_min;
  double re_max;
  double diameter;  // D / dx
  double magic;
};

inline constexpr std::array<RegimeProfile, 6> kRegimeProfiles{{
    {"darcy", 0.0, 0.01, 23.4, 0.25},
    {"laminar", 0.01, 198.0, 37.8, 3.0 / 16.0},
    {"unsteady", 198.0, 509.0, 59.4, 1.0 / 12.0},
    {"transition", 509.0, 1008.0, 70.2, 1e-5},
    {"turbulent", 1008.0, 1617.0, 102.6, 1e-5},
    {"turbulent-fine", 1617.0, 5813.0, 145.8, 6e-6},
}};

inline const RegimeProfile& regime_profile(const std::string& name) {
  for (const auto& p : kRegimeProfiles)
    if (name == p.name) return p;
  std::string known;
  for (const auto& p : kRegimeProfiles) known += std::string(known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown profile '" + name + "' (known: " + known + ")");
}

/// Profile whose Re_p range contains @p re_p.
inline const RegimeProfile& regime_for_reynolds(double re_p) {
  for (const auto& p : kRegimeProfiles)
    if (re_p <= p.re_max) return p;
  return kRegimeProfiles.back();
}

inline Json default_config() {
  return Json::parse(R"({
    "geometry": {"type": "single_sphere", "radius": 4.5, "solid_fraction": 0.6,
                 "offset": [0.0, 0.0, 0.0]},
    "collision": {"operator": "TRT", "viscosity": 0.1, "magic": 0.1875, "energy_ratio": 4.6},
    "wall_scheme": "CLI",
    "drive": {"axis": 0, "delta_rho": 1e-5},
    "control": {"max_steps": 200000, "min_steps": 0, "cadence": 10, "window_steps": 500,
                "window_flow_through": 0.0, "tolerance": 1e-7, "averaging_steps": 0},
    "output": {"field_every": 0, "checkpoint_every": 0, "final_fields": false},
    "drag_area": "domain",
    "threads": 1,
    "seed": 0,
    "initial_noise": 0.0
  })");
}

inline Json profile_config(const std::string& name) {
  const auto& p = regime_profile(name);
  Json j;
  j["geometry"] = {{"type", "single_sphere"}, {"radius", 0.5 * p.diameter}, {"solid_fraction", 0.6}};
  j["collision"] = {{"operator", "TRT"}, {"magic", p.magic}};
  j["wall_scheme"] = "CLI";
  j["profile"] = name;
  return j;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration " + path);
  try {
    return Json::parse(is, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

/// Defaults, then the profile named in @p file (or @p profile), then @p file, then @p overrides.
inline Json layered_config(const Json& file, const Json& overrides = Json::object(),
                           const std::string& profile = {}) {
  Json cfg = default_config();
  std::string name = profile;
  if (name.empty() && file.contains("profile")) name = file["profile"].get<std::string>();
  if (name.empty() && overrides.contains("profile")) name = overrides["profile"].get<std::string>();
  if (!name.empty()) cfg.merge_patch(profile_config(name));
  cfg.merge_patch(file);
  cfg.merge_patch(overrides);
  return cfg;
}

/// Hash of the canonical (key-sorted) serialisation.
inline std::string config_hash(const Json& cfg) { return hex64(fnv1a64(cfg.dump())); }

// ---------------------------------------------------------------------------
// Pack files

inline Vec3 json_vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/**
 * Pack description:
 * {"domain": [nx, ny, nz], "periodic": [true, true, true],
 *  "spheres": [{"center": [x, y, z], "radius": r}, ...]}
 */
inline SpherePack parse_pack(const Json& j) {
  SpherePack pack;
  if (!j.contains("domain")) throw ConfigError("pack needs 'domain'");
  const auto& d = j["domain"];
  if (!d.is_array() || d.size() != 3) throw ConfigError("pack 'domain' must be [nx, ny, nz]");
  pack.domain = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
  if (pack.domain.nx < 1 || pack.domain.ny < 1 || pack.domain.nz < 1) {
    throw ConfigError("pack domain extents must be positive");
  }
  if (j.contains("periodic")) {
    for (int a = 0; a < 3; ++a) pack.periodic[a] = j["periodic"].at(a).get<bool>();
  }
  for (const auto& s : j.value("spheres", Json::array())) {
    Sphere sp;
    sp.center = json_vec3(s.at("center"));
    sp.radius = s.at("radius").get<double>();
    if (sp.radius < 0.0) throw ConfigError("sphere radius must be non-negative");
    pack.spheres.push_back(sp);
  }
  return pack;
}

inline Json pack_to_json(const SpherePack& pack) {
  Json j;
  j["domain"] = {pack.domain.nx, pack.domain.ny, pack.domain.nz};
  j["periodic"] = {pack.periodic[0], pack.periodic[1], pack.periodic[2]};
  j["spheres"] = Json::array();
  for (const auto& s : pack.spheres) {
    j["spheres"].push_back({{"center", {s.center[0], s.center[1], s.center[2]}}, {"radius", s.radius}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Conversion to engine types

inline SolidGeometry geometry_from_json(const Json& g, const std::string& base_dir = {}) {
  const std::string type = g.value("type", "single_sphere");
  if (type == "single_sphere") {
    const double chi = g.value("solid_fraction", 0.6);
    const Vec3 off = g.contains("offset") ? json_vec3(g["offset"]) : Vec3{0.0, 0.0, 0.0};
    if (g.contains("edge") && !g["edge"].is_null()) {
      return single_sphere_cell_with_edge(g["edge"].get<int>(), chi, off);
    }
    return single_sphere_cell(g.value("radius", 4.5), chi, off);
  }
  if (type == "pack") {
    if (g.contains("file")) {
      std::string path = g["file"].get<std::string>();
      if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
      return parse_pack(load_json_file(path));
    }
    return parse_pack(g);
  }
  if (type == "channel") {
    return straight_channel(g.value("length", 4), g.value("width", 8), g.value("depth", 1));
  }
  throw ConfigError("unknown geometry type '" + type + "'");
}

inline CollisionConfig collision_from_json(const Json& c) {
  const auto kind = collision_kind_from_string(c.value("operator", "TRT"));
  const double nu = c.value("viscosity", 0.1);
  if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
  switch (kind) {
    case CollisionKind::SRT: return CollisionConfig::srt(nu);
    case CollisionKind::TRT: return CollisionConfig::trt(nu, c.value("magic", 0.25));
    case CollisionKind::MRT: return CollisionConfig::mrt(nu, c.value("energy_ratio", 4.6));
  }
  throw ConfigError("unreachable collision kind");
}

inline RunControl control_from_json(const Json& c) {
  RunControl r;
  r.max_steps = c.value("max_steps", r.max_steps);
  r.min_steps = c.value("min_steps", r.min_steps);
  r.cadence = c.value("cadence", r.cadence);
  r.window_steps = c.value("window_steps", r.window_steps);
  r.window_flow_through = c.value("window_flow_through", r.window_flow_through);
  r.tolerance = c.value("tolerance", r.tolerance);
  r.averaging_steps = c.value("averaging_steps", r.averaging_steps);
  if (r.cadence == 0) throw ConfigError("control.cadence must be positive");
  if (!(r.tolerance > 0.0)) throw ConfigError("control.tolerance must be positive");
  return r;
}

inline SimulationConfig simulation_config_from_json(const Json& cfg, const std::string& base_dir = {}) {
  SimulationConfig sc;
  sc.geometry = geometry_from_json(cfg.at("geometry"), base_dir);
  sc.collision = collision_from_json(cfg.at("collision"));
  sc.wall_scheme = wall_scheme_from_string(cfg.value("wall_scheme", "CLI"));
  const auto& d = cfg.at("drive");
  sc.drive.axis = d.value("axis", 0);
  sc.drive.delta_rho = d.value("delta_rho", 0.0);
  sc.drive.validate(geometry_shape(sc.geometry));
  sc.control = control_from_json(cfg.at("control"));
  return sc;
}

/// Radius of the first sphere, or the channel half-width.
inline double characteristic_radius(const SolidGeometry& g) {
  if (const auto* p = std::get_if<SpherePack>(&g)) {
    return p->spheres.empty() ? 0.0 : p->spheres.front().radius;
  }
  const auto& ch = std::get<ChannelWalls>(g);
  return 0.5 * (ch.upper - ch.lower);
}

/// Add uniform noise of amplitude @p amp to the density of every fluid cell.
inline void perturb_density(Simulation& sim, double amp, std::uint64_t seed) {
  if (amp == 0.0) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  auto& f = sim.field();
  for (std::size_t c = 0; c < f.cells(); ++c) {
    if (!sim.flags().fluid(c)) continue;
    const double d = dist(rng);
    for (int k = 0; k < kQ; ++k) f.at(k, c) += kD3Q19.w[k] * d;
  }
}

}  // namespace porelbm
