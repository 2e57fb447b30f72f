#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "loadorbit/connect.hpp"
#include "loadorbit/geometry.hpp"
#include "loadorbit/orbit.hpp"
#include "loadorbit/rng.hpp"
#include "loadorbit/sim.hpp"
#include "loadorbit/types.hpp"

namespace loadorbit {

using json = nlohmann::ordered_json;

// Process exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;   // bad config, bad file, bad arguments
inline constexpr int kExitLayout = 2;  // degenerate attachment layout
inline constexpr int kExitOrbit = 3;   // orbit failed verification
inline constexpr int kExitVerify = 4;  // artifact / recomputation mismatch
inline constexpr int kExitPlan = 5;    // path planning failed
inline constexpr int kExitSim = 6;     // simulation diverged

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

struct LayoutSpec {
  std::string type;            // "circle" | "perturbed-circle" | "points"
  int n = 0;
  double radius = 0.0;         // m
  double angle_jitter = 0.0;   // rad, per-point draw in [-angle_jitter, 0]
  double z_jitter = 0.0;       // m, per-point draw in [0, z_jitter]
  std::uint64_t seed = 0;
  std::vector<Vec3> points;    // "points" type only
};

struct LoadSpec {
  double mass = 0.5;                            // kg
  Mat3 inertia = 0.01 * Mat3::Identity();       // kg m^2
};

struct WrenchSpec {
  std::string type;                 // "gravity" | "explicit"
  double mass = 0.0;                // kg ("gravity")
  Vec3 direction = Vec3(0, 0, -1);  // unit, toward the pull ("gravity")
  Vec3 force = Vec3::Zero();        // N ("explicit")
  Vec3 torque = Vec3::Zero();       // N m ("explicit")
};

struct OrbitSpec {
  std::string type;        // "sampled" | "explicit"
  int trials = 1000;
  std::uint64_t seed = 0;
  double omega = 1.0;      // rad/s
  double amplitude = 1.0;
  MatX A;                  // "explicit" type only, k x 2
};

struct SimSpec {
  double dt = 1e-3;        // s
  double duration = 20.0;  // s
  double gravity = 9.81;   // m/s^2
};

struct PlanSpec {
  double min_clearance = 1e-3;  // N
  std::uint64_t seed = 0;
  int max_retries = 64;
};

struct ScenarioConfig {
  LayoutSpec layout;
  LoadSpec load;
  WrenchSpec wrench;
  CableParams cable;
  CarrierParams carrier;
  OrbitSpec orbit;
  SimSpec sim;
  PlanSpec plan;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& context, const std::string& what) {
  throw std::invalid_argument("config: " + context + ": " + what);
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
  if (!j.is_object()) config_error(context, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) config_error(context, "unknown field '" + it.key() + "'");
  }
}

inline const json& require(const json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) config_error(context, "missing field '" + std::string(key) + "'");
  return *it;
}

inline double get_number(const json& j, const std::string& context) {
  if (!j.is_number()) config_error(context, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_error(context, "value must be finite");
  return v;
}

inline double get_field(const json& j, const char* key, const std::string& context) {
  return get_number(require(j, key, context), context + "." + key);
}

inline int get_int(const json& j, const std::string& context) {
  if (!j.is_number_integer()) config_error(context, "expected an integer");
  return j.get<int>();
}

inline std::uint64_t get_seed(const json& j, const std::string& context) {
  if (!j.is_number_unsigned() && !j.is_number_integer()) {
    config_error(context, "expected a non-negative integer seed");
  }
  if (j.is_number_integer() && j.get<std::int64_t>() < 0) {
    config_error(context, "expected a non-negative integer seed");
  }
  return j.get<std::uint64_t>();
}

inline std::string get_string(const json& j, const char* key, const std::string& context) {
  const json& v = require(j, key, context);
  if (!v.is_string()) config_error(context + "." + key, "expected a string");
  return v.get<std::string>();
}

inline Vec3 get_vec3(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) config_error(context, "expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v(i) = get_number(j[i], context);
  return v;
}

// A 3x3 matrix parameter: either a scalar s (meaning s * identity) or a 3x3
// nested array.
inline Mat3 get_mat3(const json& j, const std::string& context) {
  if (j.is_number()) return get_number(j, context) * Mat3::Identity();
  if (!j.is_array() || j.size() != 3) {
    config_error(context, "expected a scalar or a 3x3 array");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 3) {
      config_error(context, "expected a scalar or a 3x3 array");
    }
    for (int c = 0; c < 3; ++c) m(r, c) = get_number(j[r][c], context);
  }
  return m;
}

inline json mat3_to_json(const Mat3& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) {
    json row = json::array();
    for (int c = 0; c < 3; ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline json vec3_to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

inline json matx_to_json(const MatX& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline MatX get_matx(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) config_error(context, "expected a non-empty 2D array");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) config_error(context, "expected a non-empty 2D array");
  MatX m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      config_error(context, "rows must all have the same length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          get_number(j[r][c], context);
    }
  }
  return m;
}

}  // namespace detail

inline LayoutSpec parse_layout(const json& j) {
  LayoutSpec spec;
  spec.type = detail::get_string(j, "type", "layout");
  if (spec.type == "circle") {
    detail::check_keys(j, {"type", "n", "radius"}, "layout");
    spec.n = detail::get_int(detail::require(j, "n", "layout"), "layout.n");
    spec.radius = detail::get_field(j, "radius", "layout");
  } else if (spec.type == "perturbed-circle") {
    detail::check_keys(j, {"type", "n", "radius", "angle_jitter", "z_jitter", "seed"},
                       "layout");
    spec.n = detail::get_int(detail::require(j, "n", "layout"), "layout.n");
    spec.radius = detail::get_field(j, "radius", "layout");
    spec.angle_jitter = detail::get_field(j, "angle_jitter", "layout");
    spec.z_jitter = detail::get_field(j, "z_jitter", "layout");
    spec.seed = detail::get_seed(detail::require(j, "seed", "layout"), "layout.seed");
    if (spec.angle_jitter < 0.0 || spec.z_jitter < 0.0) {
      detail::config_error("layout", "jitters must be non-negative");
    }
  } else if (spec.type == "points") {
    detail::check_keys(j, {"type", "points"}, "layout");
    const json& pts = detail::require(j, "points", "layout");
    if (!pts.is_array()) detail::config_error("layout.points", "expected an array");
    for (const json& p : pts) spec.points.push_back(detail::get_vec3(p, "layout.points"));
    if (spec.points.size() < 3) detail::config_error("layout.points", "need at least 3 points");
  } else {
    detail::config_error("layout.type", "unknown type '" + spec.type + "'");
  }
  if (spec.type != "points") {
    if (spec.n < 3) detail::config_error("layout.n", "need at least 3 carriers");
    if (!(spec.radius > 0.0)) detail::config_error("layout.radius", "must be positive");
  }
  return spec;
}

/// Materializes layout points. Generated layouts draw, per point in index
/// order, one angle offset in [-angle_jitter, 0] and one height in
/// [0, z_jitter] from a SplitMix64 stream seeded with layout.seed.
inline std::vector<Vec3> resolve_layout(const LayoutSpec& spec) {
  if (spec.type == "points") return spec.points;
  std::vector<Vec3> pts;
  SplitMix64 rng(spec.seed);
  for (int i = 0; i < spec.n; ++i) {
    double angle = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(spec.n);
    double z = 0.0;
    if (spec.type == "perturbed-circle") {
      angle += rng.uniform(-spec.angle_jitter, 0.0);
      z = rng.uniform(0.0, spec.z_jitter);
    }
    pts.push_back(Vec3(spec.radius * std::cos(angle), spec.radius * std::sin(angle), z));
  }
  return pts;
}

inline WrenchSpec parse_wrench(const json& j) {
  WrenchSpec spec;
  spec.type = detail::get_string(j, "type", "wrench");
  if (spec.type == "gravity") {
    detail::check_keys(j, {"type", "mass", "direction"}, "wrench");
    spec.mass = detail::get_field(j, "mass", "wrench");
    if (!(spec.mass > 0.0)) detail::config_error("wrench.mass", "must be positive");
    spec.direction = detail::get_vec3(detail::require(j, "direction", "wrench"),
                                      "wrench.direction");
    if (spec.direction.norm() < 1e-9) {
      detail::config_error("wrench.direction", "must be nonzero");
    }
    spec.direction.normalize();
  } else if (spec.type == "explicit") {
    detail::check_keys(j, {"type", "force", "torque"}, "wrench");
    spec.force = detail::get_vec3(detail::require(j, "force", "wrench"), "wrench.force");
    spec.torque = detail::get_vec3(detail::require(j, "torque", "wrench"), "wrench.torque");
  } else {
    detail::config_error("wrench.type", "unknown type '" + spec.type + "'");
  }
  return spec;
}

inline Wrench resolve_wrench(const WrenchSpec& spec) {
  if (spec.type == "gravity") return gravity_wrench(spec.mass, spec.direction);
  return Wrench{spec.force, spec.torque};
}

inline OrbitSpec parse_orbit(const json& j) {
  OrbitSpec spec;
  spec.type = detail::get_string(j, "type", "orbit");
  if (spec.type == "sampled") {
    detail::check_keys(j, {"type", "trials", "seed", "omega", "amplitude"}, "orbit");
    spec.trials = detail::get_int(detail::require(j, "trials", "orbit"), "orbit.trials");
    if (spec.trials < 1) detail::config_error("orbit.trials", "must be >= 1");
    spec.seed = detail::get_seed(detail::require(j, "seed", "orbit"), "orbit.seed");
  } else if (spec.type == "explicit") {
    detail::check_keys(j, {"type", "A", "omega", "amplitude"}, "orbit");
    spec.A = detail::get_matx(detail::require(j, "A", "orbit"), "orbit.A");
    if (spec.A.cols() != 2) detail::config_error("orbit.A", "must have exactly 2 columns");
  } else {
    detail::config_error("orbit.type", "unknown type '" + spec.type + "'");
  }
  if (j.contains("omega")) spec.omega = detail::get_field(j, "omega", "orbit");
  if (j.contains("amplitude")) spec.amplitude = detail::get_field(j, "amplitude", "orbit");
  if (!(spec.omega > 0.0) || !(spec.amplitude > 0.0)) {
    detail::config_error("orbit", "omega and amplitude must be positive");
  }
  return spec;
}

inline ScenarioConfig parse_config(const json& j) {
  detail::check_keys(
      j, {"layout", "load", "wrench", "cable", "carrier", "orbit", "sim", "plan"},
      "config");
  ScenarioConfig cfg;
  cfg.layout = parse_layout(detail::require(j, "layout", "config"));
  cfg.wrench = parse_wrench(detail::require(j, "wrench", "config"));
  cfg.orbit = parse_orbit(detail::require(j, "orbit", "config"));

  const json& load = detail::require(j, "load", "config");
  detail::check_keys(load, {"mass", "inertia"}, "load");
  cfg.load.mass = detail::get_field(load, "mass", "load");
  if (!(cfg.load.mass > 0.0)) detail::config_error("load.mass", "must be positive");
  if (load.contains("inertia")) {
    cfg.load.inertia = detail::get_mat3(load["inertia"], "load.inertia");
  }

  if (j.contains("cable")) {
    const json& cable = j["cable"];
    detail::check_keys(cable, {"Kc", "Bc", "l0"}, "cable");
    if (cable.contains("Kc")) cfg.cable.Kc = detail::get_field(cable, "Kc", "cable");
    if (cable.contains("Bc")) cfg.cable.Bc = detail::get_field(cable, "Bc", "cable");
    if (cable.contains("l0")) cfg.cable.l0 = detail::get_field(cable, "l0", "cable");
    if (!(cfg.cable.Kc > 0.0) || cfg.cable.Bc < 0.0 || !(cfg.cable.l0 > 0.0)) {
      detail::config_error("cable", "require Kc > 0, Bc >= 0, l0 > 0");
    }
  }

  if (j.contains("carrier")) {
    const json& carrier = j["carrier"];
    detail::check_keys(carrier, {"Mi", "K1", "K2", "K3"}, "carrier");
    if (carrier.contains("Mi")) cfg.carrier.Mi = detail::get_mat3(carrier["Mi"], "carrier.Mi");
    if (carrier.contains("K1")) cfg.carrier.K1 = detail::get_mat3(carrier["K1"], "carrier.K1");
    if (carrier.contains("K2")) cfg.carrier.K2 = detail::get_mat3(carrier["K2"], "carrier.K2");
    if (carrier.contains("K3")) cfg.carrier.K3 = detail::get_mat3(carrier["K3"], "carrier.K3");
  }

  if (j.contains("sim")) {
    const json& sim = j["sim"];
    detail::check_keys(sim, {"dt", "duration", "gravity"}, "sim");
    if (sim.contains("dt")) cfg.sim.dt = detail::get_field(sim, "dt", "sim");
    if (sim.contains("duration")) cfg.sim.duration = detail::get_field(sim, "duration", "sim");
    if (sim.contains("gravity")) cfg.sim.gravity = detail::get_field(sim, "gravity", "sim");
    if (!(cfg.sim.dt > 0.0) || cfg.sim.duration < 0.0) {
      detail::config_error("sim", "require dt > 0 and duration >= 0");
    }
  }

  if (j.contains("plan")) {
    const json& plan = j["plan"];
    detail::check_keys(plan, {"min_clearance", "seed", "max_retries"}, "plan");
    if (plan.contains("min_clearance")) {
      cfg.plan.min_clearance = detail::get_field(plan, "min_clearance", "plan");
    }
    if (plan.contains("seed")) {
      cfg.plan.seed = detail::get_seed(plan["seed"], "plan.seed");
    }
    if (plan.contains("max_retries")) {
      cfg.plan.max_retries = detail::get_int(plan["max_retries"], "plan.max_retries");
    }
    if (!(cfg.plan.min_clearance > 0.0) || cfg.plan.max_retries < 1) {
      detail::config_error("plan", "require min_clearance > 0 and max_retries >= 1");
    }
  }

  return cfg;
}

inline json config_to_json(const ScenarioConfig& cfg) {
  json layout;
  layout["type"] = cfg.layout.type;
  if (cfg.layout.type == "points") {
    json pts = json::array();
    for (const Vec3& p : cfg.layout.points) pts.push_back(detail::vec3_to_json(p));
    layout["points"] = pts;
  } else {
    layout["n"] = cfg.layout.n;
    layout["radius"] = cfg.layout.radius;
    if (cfg.layout.type == "perturbed-circle") {
      layout["angle_jitter"] = cfg.layout.angle_jitter;
      layout["z_jitter"] = cfg.layout.z_jitter;
      layout["seed"] = cfg.layout.seed;
    }
  }

  json wrench;
  wrench["type"] = cfg.wrench.type;
  if (cfg.wrench.type == "gravity") {
    wrench["mass"] = cfg.wrench.mass;
    wrench["direction"] = detail::vec3_to_json(cfg.wrench.direction);
  } else {
    wrench["force"] = detail::vec3_to_json(cfg.wrench.force);
    wrench["torque"] = detail::vec3_to_json(cfg.wrench.torque);
  }

  json orbit;
  orbit["type"] = cfg.orbit.type;
  if (cfg.orbit.type == "sampled") {
    orbit["trials"] = cfg.orbit.trials;
    orbit["seed"] = cfg.orbit.seed;
  } else {
    orbit["A"] = detail::matx_to_json(cfg.orbit.A);
  }
  orbit["omega"] = cfg.orbit.omega;
  orbit["amplitude"] = cfg.orbit.amplitude;

  json out;
  out["layout"] = layout;
  out["load"] = {{"mass", cfg.load.mass}, {"inertia", detail::mat3_to_json(cfg.load.inertia)}};
  out["wrench"] = wrench;
  out["cable"] = {{"Kc", cfg.cable.Kc}, {"Bc", cfg.cable.Bc}, {"l0", cfg.cable.l0}};
  out["carrier"] = {{"Mi", detail::mat3_to_json(cfg.carrier.Mi)},
                    {"K1", detail::mat3_to_json(cfg.carrier.K1)},
                    {"K2", detail::mat3_to_json(cfg.carrier.K2)},
                    {"K3", detail::mat3_to_json(cfg.carrier.K3)}};
  out["orbit"] = orbit;
  out["sim"] = {{"dt", cfg.sim.dt}, {"duration", cfg.sim.duration}, {"gravity", cfg.sim.gravity}};
  out["plan"] = {{"min_clearance", cfg.plan.min_clearance},
                 {"seed", cfg.plan.seed},
                 {"max_retries", cfg.plan.max_retries}};
  return out;
}

// ---------------------------------------------------------------------------
// Serialization helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// FNV-1a 64-bit over the %.17g decimal forms of the entries in row-major
// order, comma-separated; returned as 16 hex digits. Pins the numeric content
// of a matrix across versions without storing the matrix.
inline std::string matrix_checksum(const MatX& m) {
  std::uint64_t h = 14695981039346656037ULL;
  auto feed = [&h](char ch) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  };
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (char ch : format_g17(m(r, c))) feed(ch);
      feed(',');
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Write-temp-then-rename so a crash never leaves a half-written output.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open file for writing: " + tmp);
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline json load_json_file(const std::string& path) {
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, true, /*ignore_comments=*/false);
  return j;
}

inline json report_to_json(const OrbitReport& r) {
  json out;
  out["valid"] = r.valid;
  out["min_tension"] = r.min_tension;
  out["min_tension_time"] = r.min_tension_time;
  out["min_tension_carrier"] = r.min_tension_carrier;
  out["min_carrier_speed"] = r.min_carrier_speed;
  out["min_speed_time"] = r.min_speed_time;
  out["min_speed_carrier"] = r.min_speed_carrier;
  out["rank_checks"] = r.rank_checks;
  out["image_residuals"] = r.image_residuals;
  out["image_thresholds"] = r.image_thresholds;
  out["samples"] = r.samples;
  out["eps_tension"] = r.eps_tension;
  out["eps_speed"] = r.eps_speed;
  return out;
}

inline OrbitReport report_from_json(const json& j) {
  check_keys(j,
             {"valid", "min_tension", "min_tension_time", "min_tension_carrier",
              "min_carrier_speed", "min_speed_time", "min_speed_carrier", "rank_checks",
              "image_residuals", "image_thresholds", "samples", "eps_tension", "eps_speed"},
             "report");
  OrbitReport r;
  r.valid = require(j, "valid", "report").get<bool>();
  r.min_tension = get_number(require(j, "min_tension", "report"), "report.min_tension");
  r.min_tension_time =
      get_number(require(j, "min_tension_time", "report"), "report.min_tension_time");
  r.min_tension_carrier = get_int(require(j, "min_tension_carrier", "report"), "report");
  r.min_carrier_speed =
      get_number(require(j, "min_carrier_speed", "report"), "report.min_carrier_speed");
  r.min_speed_time = get_number(require(j, "min_speed_time", "report"), "report.min_speed_time");
  r.min_speed_carrier = get_int(require(j, "min_speed_carrier", "report"), "report");
  for (const json& v : require(j, "rank_checks", "report")) {
    r.rank_checks.push_back(get_int(v, "report.rank_checks"));
  }
  for (const json& v : require(j, "image_residuals", "report")) {
    r.image_residuals.push_back(get_number(v, "report.image_residuals"));
  }
  for (const json& v : require(j, "image_thresholds", "report")) {
    r.image_thresholds.push_back(get_number(v, "report.image_thresholds"));
  }
  r.samples = get_int(require(j, "samples", "report"), "report.samples");
  r.eps_tension = get_number(require(j, "eps_tension", "report"), "report.eps_tension");
  r.eps_speed = get_number(require(j, "eps_speed", "report"), "report.eps_speed");
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Orbit artifact
// ---------------------------------------------------------------------------

inline constexpr const char* kArtifactFormat = "loadorbit-orbit/1";

/// Everything needed to re-verify and simulate an orbit: the resolved layout,
/// the wrench, the selected coefficient matrix, checksums pinning the grasp
/// model the generator saw, and the generator's verification report.
struct OrbitArtifact {
  std::vector<Vec3> points;     // m, body frame
  Wrench wrench{Vec3::Zero(), Vec3::Zero()};
  int n = 0;
  int k = 0;
  std::string checksum_G;
  std::string checksum_Gdag;
  std::string checksum_N;
  MatX A;
  double omega = 1.0;
  double amplitude = 1.0;
  std::uint64_t orbit_seed = 0;
  int trials = 0;               // 0 when A was given explicitly
  std::vector<double> lengths;  // m, cable lengths used for speed checks
  OrbitReport report;
};

inline json artifact_to_json(const OrbitArtifact& art) {
  json pts = json::array();
  for (const Vec3& p : art.points) pts.push_back(detail::vec3_to_json(p));
  json out;
  out["format"] = kArtifactFormat;
  out["layout_points"] = pts;
  out["wrench"] = {{"force", detail::vec3_to_json(art.wrench.force)},
                   {"torque", detail::vec3_to_json(art.wrench.torque)}};
  out["dimensions"] = {{"n", art.n}, {"k", art.k}};
  out["grasp_checksums"] = {{"G", art.checksum_G},
                            {"Gdag", art.checksum_Gdag},
                            {"N", art.checksum_N}};
  out["orbit"] = {{"A", detail::matx_to_json(art.A)},
                  {"omega", art.omega},
                  {"amplitude", art.amplitude},
                  {"seed", art.orbit_seed},
                  {"trials", art.trials}};
  out["lengths"] = art.lengths;
  out["report"] = detail::report_to_json(art.report);
  return out;
}

inline OrbitArtifact artifact_from_json(const json& j) {
  detail::check_keys(j,
                     {"format", "layout_points", "wrench", "dimensions", "grasp_checksums",
                      "orbit", "lengths", "report"},
                     "artifact");
  const std::string format = detail::get_string(j, "format", "artifact");
  if (format != kArtifactFormat) {
    throw std::runtime_error("artifact: unsupported format '" + format + "'");
  }
  OrbitArtifact art;
  for (const json& p : detail::require(j, "layout_points", "artifact")) {
    art.points.push_back(detail::get_vec3(p, "artifact.layout_points"));
  }
  const json& w = detail::require(j, "wrench", "artifact");
  detail::check_keys(w, {"force", "torque"}, "artifact.wrench");
  art.wrench.force = detail::get_vec3(detail::require(w, "force", "artifact.wrench"),
                                      "artifact.wrench.force");
  art.wrench.torque = detail::get_vec3(detail::require(w, "torque", "artifact.wrench"),
                                       "artifact.wrench.torque");
  const json& dims = detail::require(j, "dimensions", "artifact");
  detail::check_keys(dims, {"n", "k"}, "artifact.dimensions");
  art.n = detail::get_int(detail::require(dims, "n", "artifact.dimensions"), "artifact.n");
  art.k = detail::get_int(detail::require(dims, "k", "artifact.dimensions"), "artifact.k");
  const json& sums = detail::require(j, "grasp_checksums", "artifact");
  detail::check_keys(sums, {"G", "Gdag", "N"}, "artifact.grasp_checksums");
  art.checksum_G = detail::get_string(sums, "G", "artifact.grasp_checksums");
  art.checksum_Gdag = detail::get_string(sums, "Gdag", "artifact.grasp_checksums");
  art.checksum_N = detail::get_string(sums, "N", "artifact.grasp_checksums");
  const json& orbit = detail::require(j, "orbit", "artifact");
  detail::check_keys(orbit, {"A", "omega", "amplitude", "seed", "trials"}, "artifact.orbit");
  art.A = detail::get_matx(detail::require(orbit, "A", "artifact.orbit"), "artifact.orbit.A");
  art.omega = detail::get_field(orbit, "omega", "artifact.orbit");
  art.amplitude = detail::get_field(orbit, "amplitude", "artifact.orbit");
  art.orbit_seed =
      detail::get_seed(detail::require(orbit, "seed", "artifact.orbit"), "artifact.orbit.seed");
  art.trials = detail::get_int(detail::require(orbit, "trials", "artifact.orbit"),
                               "artifact.orbit.trials");
  for (const json& v : detail::require(j, "lengths", "artifact")) {
    art.lengths.push_back(detail::get_number(v, "artifact.lengths"));
  }
  art.report = detail::report_from_json(detail::require(j, "report", "artifact"));
  return art;
}

// ---------------------------------------------------------------------------
// Time-series CSV
// ---------------------------------------------------------------------------

/// RFC-4180 CSV (CRLF line endings, header row mandatory, 17 significant
/// digits). Columns: t, pL_x, pL_y, pL_z, phi, theta, psi, then per carrier i
/// (0-based): pi_x, pi_y, pi_z, vi_x, vi_y, vi_z, Ti. One row per completed
/// step; a zero-duration run yields only the header.
inline std::string time_series_csv(const TimeSeries& series) {
  const std::size_t n = series.initial.carrier_positions.size();
  std::string out = "t,pL_x,pL_y,pL_z,phi,theta,psi";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string idx = std::to_string(i);
    for (const char* field : {"p", "v"}) {
      for (const char* axis : {"x", "y", "z"}) {
        out += "," + std::string(field) + idx + "_" + axis;
      }
    }
    out += ",T" + idx;
  }
  out += "\r\n";
  for (const TimeSample& s : series.samples) {
    out += detail::format_g17(s.t);
    for (int a = 0; a < 3; ++a) out += "," + detail::format_g17(s.load_position(a));
    for (int a = 0; a < 3; ++a) out += "," + detail::format_g17(s.load_rpy(a));
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) out += "," + detail::format_g17(s.carrier_positions[i](a));
      for (int a = 0; a < 3; ++a) out += "," + detail::format_g17(s.carrier_velocities[i](a));
      out += "," + detail::format_g17(s.tensions[i]);
    }
    out += "\r\n";
  }
  return out;
}

inline json summary_to_json(const SimSummary& summary, const SimSpec& sim) {
  json out;
  out["max_position_deviation"] = summary.max_position_deviation;
  out["max_attitude_deviation"] = summary.max_attitude_deviation;
  out["min_tension"] = summary.min_tension;
  out["min_carrier_speed"] = summary.min_carrier_speed;
  out["plane_crossed"] = summary.plane_crossed;
  out["dt"] = sim.dt;
  out["duration"] = sim.duration;
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

namespace detail {

inline GraspModel model_from_points(const std::vector<Vec3>& points) {
  return build_grasp_model(AttachmentLayout(points));
}

/// Orbit sampling and path planning require a regular layout, so the commands
/// that run them reject irregular ones up front with the offending subset.
inline GraspModel regular_model_from_points(const std::vector<Vec3>& points) {
  const AttachmentLayout layout(points);
  const LayoutCheck check = check_layout_assumption(layout);
  if (!check.regular) {
    std::string msg = "layout is not regular";
    if (!check.witness.empty()) {
      msg += " (collinear attachment subset:";
      for (int idx : check.witness) msg += " " + std::to_string(idx);
      msg += ")";
    }
    throw DegenerateLayout(msg);
  }
  return build_grasp_model(layout);
}

inline Wrench resolve_wrench_from(const OrbitArtifact& art) {
  return Wrench{art.wrench.force, art.wrench.torque};
}

inline LinearOrbit make_orbit(const OrbitSpec& spec, const GraspModel& gm, const Wrench& w) {
  if (spec.type == "explicit") {
    if (spec.A.rows() != gm.k()) {
      throw std::invalid_argument("orbit.A: expected " + std::to_string(gm.k()) + " rows");
    }
    return LinearOrbit(spec.A, spec.omega, spec.amplitude);
  }
  LinearOrbit orbit = sample_orbit_matrix(gm, w, spec.trials, spec.seed);
  return LinearOrbit(orbit.A, spec.omega, spec.amplitude);
}

inline VecX load_lambda_file(const std::string& path, int k) {
  const json j = load_json_file(path);
  check_keys(j, {"lambda"}, "lambda file");
  const json& arr = require(j, "lambda", "lambda file");
  if (!arr.is_array() || static_cast<int>(arr.size()) != k) {
    throw std::invalid_argument("lambda file " + path + ": expected an array of " +
                                std::to_string(k) + " numbers");
  }
  VecX v(k);
  for (int i = 0; i < k; ++i) v(i) = get_number(arr[i], "lambda file");
  return v;
}

inline std::string summary_path_for(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".summary.json";
  }
  return csv_path + ".summary.json";
}

}  // namespace detail

/// generate: resolve the scenario, pick (or accept) a coefficient matrix,
/// verify the orbit, and write the artifact. Exit 0 iff the orbit is valid;
/// the artifact is written either way so failures can be inspected.
inline int cmd_generate(const std::string& config_path, const std::string& out_path,
                        std::optional<std::uint64_t> seed_override, std::ostream& out,
                        std::ostream& err) {
  try {
    ScenarioConfig cfg = parse_config(detail::load_json_file(config_path));
    if (seed_override) cfg.orbit.seed = *seed_override;
    const std::vector<Vec3> points = resolve_layout(cfg.layout);
    const GraspModel gm = detail::regular_model_from_points(points);
    const Wrench w = resolve_wrench(cfg.wrench);
    const LinearOrbit orbit = detail::make_orbit(cfg.orbit, gm, w);

    OrbitArtifact art;
    art.points = points;
    art.wrench = w;
    art.n = gm.n();
    art.k = gm.k();
    art.checksum_G = detail::matrix_checksum(gm.G);
    art.checksum_Gdag = detail::matrix_checksum(gm.Gdag);
    art.checksum_N = detail::matrix_checksum(gm.N);
    art.A = orbit.A;
    art.omega = orbit.omega;
    art.amplitude = orbit.amplitude;
    art.orbit_seed = cfg.orbit.seed;
    art.trials = (cfg.orbit.type == "sampled") ? cfg.orbit.trials : 0;
    art.lengths.assign(static_cast<std::size_t>(gm.n()), cfg.cable.l0);
    art.report = verify_orbit(gm, w, orbit, 4096, 1e-3, 1e-4, art.lengths);

    detail::atomic_write(out_path, artifact_to_json(art).dump(2) + "\n");
    out << (art.report.valid ? "orbit valid" : "orbit invalid")
        << " (min tension " << detail::format_g17(art.report.min_tension)
        << " N, min carrier speed " << detail::format_g17(art.report.min_carrier_speed)
        << " m/s); artifact written to " << out_path << "\n";
    return art.report.valid ? kExitOk : kExitOrbit;
  } catch (const DegenerateLayout& e) {
    err << "degenerate layout: " << e.what() << "\n";
    return kExitLayout;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

/// verify: rebuild the grasp model from the artifact's stored layout, check
/// the stored checksums still match (guards against basis-convention drift),
/// recompute the report from scratch, and compare against the stored one.
/// Sampling parameters can be overridden; numeric minima are only compared
/// when they match the stored run. Exit 4 on any mismatch, else 0 when the
/// recomputed report is valid, else 3.
inline int cmd_verify(const std::string& artifact_path, std::optional<int> samples,
                      std::optional<double> eps_tension, std::optional<double> eps_speed,
                      const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    const OrbitArtifact art = artifact_from_json(detail::load_json_file(artifact_path));
    const GraspModel gm = detail::model_from_points(art.points);
    if (gm.n() != art.n || gm.k() != art.k) {
      err << "verify mismatch: stored dimensions n=" << art.n << " k=" << art.k
          << " but recomputed n=" << gm.n() << " k=" << gm.k() << "\n";
      return kExitVerify;
    }
    const std::string sum_G = detail::matrix_checksum(gm.G);
    const std::string sum_Gdag = detail::matrix_checksum(gm.Gdag);
    const std::string sum_N = detail::matrix_checksum(gm.N);
    if (sum_G != art.checksum_G || sum_Gdag != art.checksum_Gdag || sum_N != art.checksum_N) {
      err << "verify mismatch: grasp matrix checksums differ from artifact\n";
      return kExitVerify;
    }

    const LinearOrbit orbit(art.A, art.omega, art.amplitude);
    const int use_samples = samples.value_or(art.report.samples);
    const double use_eps_t = eps_tension.value_or(art.report.eps_tension);
    const double use_eps_v = eps_speed.value_or(art.report.eps_speed);
    const OrbitReport fresh =
        verify_orbit(gm, detail::resolve_wrench_from(art), orbit, use_samples, use_eps_t,
                     use_eps_v, art.lengths);

    bool mismatch = false;
    std::string why;
    if (fresh.rank_checks != art.report.rank_checks) {
      mismatch = true;
      why = "rank checks differ";
    }
    const bool same_sampling = use_samples == art.report.samples &&
                               use_eps_t == art.report.eps_tension &&
                               use_eps_v == art.report.eps_speed;
    if (same_sampling) {
      if (fresh.valid != art.report.valid) {
        mismatch = true;
        why = "validity flag differs";
      }
      if (std::abs(fresh.min_tension - art.report.min_tension) > 1e-9 ||
          std::abs(fresh.min_carrier_speed - art.report.min_carrier_speed) > 1e-9) {
        mismatch = true;
        why = "sampled minima differ";
      }
    }

    const json report_json = detail::report_to_json(fresh);
    out << report_json.dump(2) << "\n";
    if (!out_path.empty()) {
      detail::atomic_write(out_path, report_json.dump(2) + "\n");
    }
    if (mismatch) {
      err << "verify mismatch: " << why << "\n";
      return kExitVerify;
    }
    return fresh.valid ? kExitOk : kExitOrbit;
  } catch (const DegenerateLayout& e) {
    err << "degenerate layout: " << e.what() << "\n";
    return kExitLayout;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

/// plan: connect two nullspace coordinates from files through the scenario's
/// grasp model, writing the waypoint list with per-segment clearances.
inline int cmd_plan(const std::string& config_path, const std::string& from_path,
                    const std::string& to_path, const std::string& out_path,
                    std::optional<std::uint64_t> seed_override, std::ostream& out,
                    std::ostream& err) {
  try {
    ScenarioConfig cfg = parse_config(detail::load_json_file(config_path));
    if (seed_override) cfg.plan.seed = *seed_override;
    const std::vector<Vec3> points = resolve_layout(cfg.layout);
    const GraspModel gm = detail::regular_model_from_points(points);
    const Wrench w = resolve_wrench(cfg.wrench);
    const VecX from = detail::load_lambda_file(from_path, gm.k());
    const VecX to = detail::load_lambda_file(to_path, gm.k());

    const LambdaPath path = plan_path(gm, w, from, to, cfg.plan.min_clearance,
                                      cfg.plan.seed, cfg.plan.max_retries);

    json waypoints = json::array();
    for (const VecX& wp : path.waypoints) {
      json arr = json::array();
      for (Eigen::Index i = 0; i < wp.size(); ++i) arr.push_back(wp(i));
      waypoints.push_back(arr);
    }
    json segments = json::array();
    for (std::size_t s = 0; s + 1 < path.waypoints.size(); ++s) {
      segments.push_back(
          segment_clearance(gm, w, path.waypoints[s], path.waypoints[s + 1]).clearance);
    }
    json result;
    result["format"] = "loadorbit-path/1";
    result["waypoints"] = waypoints;
    result["segment_clearances"] = segments;
    result["clearance"] = path.clearance;
    detail::atomic_write(out_path, result.dump(2) + "\n");
    out << "path with " << path.waypoints.size() << " waypoints, clearance "
        << detail::format_g17(path.clearance) << " N; written to " << out_path << "\n";
    return kExitOk;
  } catch (const PlanningFailed& e) {
    err << "planning failed: " << e.what() << "\n";
    return kExitPlan;
  } catch (const DegenerateLayout& e) {
    err << "degenerate layout: " << e.what() << "\n";
    return kExitLayout;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

/// simulate: run the closed-loop scenario for an orbit artifact, writing the
/// time-series CSV to out_path and the summary JSON next to it
/// (<out>.summary.json, replacing a trailing .csv).
inline int cmd_simulate(const std::string& artifact_path, const std::string& config_path,
                        const std::string& out_path, std::ostream& out, std::ostream& err) {
  try {
    const OrbitArtifact art = artifact_from_json(detail::load_json_file(artifact_path));
    const ScenarioConfig cfg = parse_config(detail::load_json_file(config_path));
    const GraspModel gm = detail::model_from_points(art.points);
    const Wrench w = detail::resolve_wrench_from(art);
    const LinearOrbit orbit(art.A, art.omega, art.amplitude);

    SimWorld world;
    world.load_mass = cfg.load.mass;
    world.load_inertia = cfg.load.inertia;
    world.attachments = art.points;
    world.cables = cfg.cable;
    world.carriers = cfg.carrier;
    world.carrier_states.resize(art.points.size());
    world.gravity = cfg.sim.gravity;
    world.dt = cfg.sim.dt;
    world.duration = cfg.sim.duration;

    const TimeSeries series = run_scenario(gm, w, orbit, world);
    const SimSummary summary = summarize(series);
    const json summary_json = summary_to_json(summary, cfg.sim);

    detail::atomic_write(out_path, time_series_csv(series));
    detail::atomic_write(detail::summary_path_for(out_path), summary_json.dump(2) + "\n");
    out << summary_json.dump(2) << "\n";
    return kExitOk;
  } catch (const NumericalDivergence& e) {
    err << "simulation diverged: " << e.what() << "\n";
    return kExitSim;
  } catch (const DegenerateLayout& e) {
    err << "degenerate layout: " << e.what() << "\n";
    return kExitLayout;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace loadorbit
