#include "rover_gnc/errors.hpp"
#include "rover_gnc/mission.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rover_gnc {

namespace {

namespace pt = boost::property_tree;

// Reads typed values and remembers which keys were consumed so that
// unknown (typically misspelled) keys can be reported.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  bool has(const std::string& section, const std::string& key) const {
    const auto sec = tree_.get_child_optional(section);
    return sec && sec->find(key) != sec->not_found();
  }

  template <typename T>
  T get(const std::string& section, const std::string& key, const T& fallback) {
    used_.insert(section + "." + key);
    const auto sec = tree_.get_child_optional(section);
    if (!sec) return fallback;
    const auto it = sec->find(key);
    if (it == sec->not_found()) return fallback;
    return parse<T>(section, key, it->second.data());
  }

  template <typename T>
  T require(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    if (!has(section, key)) {
      throw ConfigError("missing required key [" + section + "] " + key);
    }
    return parse<T>(section, key, tree_.get_child(section).find(key)->second.data());
  }

  void mark_section(const std::string& section) { whole_sections_.insert(section); }

  void check_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (whole_sections_.count(section)) continue;
      if (body.empty() && !body.data().empty()) {
        throw ConfigError("key '" + section + "' outside of any section");
      }
      for (const auto& [key, value] : body) {
        if (!used_.count(section + "." + key)) {
          throw ConfigError("unknown key [" + section + "] " + key);
        }
      }
    }
  }

 private:
  template <typename T>
  static T parse(const std::string& section, const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    if constexpr (std::is_same_v<T, bool>) {
      std::string word;
      in >> word;
      if (word == "true" || word == "1" || word == "yes") return true;
      if (word == "false" || word == "0" || word == "no") return false;
      throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + text + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
      std::getline(in >> std::ws, value);
      while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) {
        value.pop_back();
      }
      return value;
    } else {
      in >> value;
      std::string rest;
      if (!in || (in >> rest)) {
        throw ConfigError("[" + section + "] " + key + ": cannot parse '" + text + "'");
      }
      return value;
    }
  }

  const pt::ptree& tree_;
  std::set<std::string> used_;
  std::set<std::string> whole_sections_;
};

void read_camera(Reader& r, const std::string& section, CameraGeometry& cam) {
  cam.height = r.get(section, "height", cam.height);
  cam.pitch_down = deg2rad(r.get(section, "pitch_down_deg", rad2deg(cam.pitch_down)));
  cam.mount.x() = r.get(section, "mount_x", cam.mount.x());
  cam.mount.y() = r.get(section, "mount_y", cam.mount.y());
  cam.rows = r.get(section, "rows", cam.rows);
  cam.cols = r.get(section, "cols", cam.cols);
  cam.near = r.get(section, "near", cam.near);
  cam.far = r.get(section, "far", cam.far);
  cam.width = r.get(section, "width", cam.width);
  cam.max_range = r.get(section, "max_range", cam.max_range);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("scenario syntax: ") + e.what());
  }
  Reader r(tree);
  ScenarioConfig c;
  c.base_dir = base_dir;
  c.name = r.get<std::string>("scenario", "name", c.name);

  // Terrain: generated from a seed or loaded from a DEM.
  if (r.has("terrain", "dem")) {
    c.dem_path = resolve(base_dir, r.get<std::string>("terrain", "dem", ""));
    if (!std::filesystem::exists(*c.dem_path)) {
      throw ConfigError("DEM file not found: " + c.dem_path->string());
    }
  } else {
    c.terrain_seed = r.require<std::uint64_t>("terrain", "seed");
  }
  TerrainSpec& t = c.terrain;
  t.origin.x() = r.get("terrain", "origin_x", t.origin.x());
  t.origin.y() = r.get("terrain", "origin_y", t.origin.y());
  t.width = r.get("terrain", "width", t.width);
  t.length = r.get("terrain", "length", t.length);
  t.resolution = r.get("terrain", "resolution", t.resolution);
  t.amplitude = r.get("terrain", "amplitude", t.amplitude);
  t.base_wavelength = r.get("terrain", "base_wavelength", t.base_wavelength);
  t.octaves = r.get("terrain", "octaves", t.octaves);
  t.persistence = r.get("terrain", "persistence", t.persistence);
  t.craters = r.get("terrain", "craters", t.craters);
  t.ripples = r.get("terrain", "ripples", t.ripples);

  r.mark_section("obstacles");
  if (const auto obs = tree.get_child_optional("obstacles")) {
    for (const auto& [key, value] : *obs) {
      std::istringstream line(value.data());
      ObstacleSpec o;
      std::string rest;
      if (!(line >> o.center.x() >> o.center.y() >> o.radius >> o.height) || (line >> rest)) {
        throw ConfigError("[obstacles] " + key + ": expected 'x y radius height'");
      }
      c.obstacles.push_back(o);
    }
  }

  c.path_file = resolve(base_dir, r.require<std::string>("path", "file"));
  if (!std::filesystem::exists(c.path_file)) {
    throw ConfigError("path file not found: " + c.path_file.string());
  }
  c.corridor = r.get("path", "corridor", c.corridor);

  HazardConfig& h = c.hazard;
  read_camera(r, "camera", h.camera);
  h.t_near = r.get("hazard", "t_near", h.t_near);
  h.t_far = r.get("hazard", "t_far", h.t_far);
  h.min_cluster = r.get("hazard", "min_cluster", h.min_cluster);
  h.safety_margin = r.get("hazard", "safety_margin", h.safety_margin);
  h.grid_resolution = r.get("hazard", "grid_resolution", h.grid_resolution);
  h.planning_margin = r.get("hazard", "planning_margin", h.planning_margin);
  h.horizon = r.get("hazard", "horizon", h.horizon);
  h.rover_radius = r.get("hazard", "rover_radius", h.rover_radius);
  h.enabled = r.get("hazard", "enabled", h.enabled);

  c.repair.max_rejoin_dist = r.get("repair", "max_rejoin", c.repair.max_rejoin_dist);
  c.repair.rejoin_clearance = r.get("repair", "clearance", c.repair.rejoin_clearance);

  ControlParams& k = c.control;
  k.lookahead = r.get("control", "lookahead", k.lookahead);
  k.v_max = r.get("control", "v_max", k.v_max);
  k.w_max = r.get("control", "w_max", k.w_max);
  k.goal_tolerance = r.get("control", "goal_tolerance", k.goal_tolerance);
  k.curvature_gain = r.get("control", "curvature_gain", k.curvature_gain);

  FdirLimits& f = c.fdir;
  f.slip_limit = r.get("fdir", "slip_limit", f.slip_limit);
  f.roll_limit = deg2rad(r.get("fdir", "roll_limit_deg", rad2deg(f.roll_limit)));
  f.pitch_limit = deg2rad(r.get("fdir", "pitch_limit_deg", rad2deg(f.pitch_limit)));
  f.corridor = r.get("fdir", "corridor", c.corridor);
  f.motor_limit = r.get("fdir", "motor_limit", f.motor_limit);
  c.slip_window = r.get("fdir", "slip_window", c.slip_window);

  NoiseConfig& n = c.noise;
  n.odometry_seed = r.require<std::uint64_t>("noise", "odometry_seed");
  n.depth_seed = r.require<std::uint64_t>("noise", "depth_seed");
  n.filter_seed = r.require<std::uint64_t>("noise", "filter_seed");
  n.drift_rate = r.get("noise", "drift_rate", n.drift_rate);
  n.depth_sigma = r.get("noise", "depth_sigma", n.depth_sigma);

  c.policy = parse_mode_policy(r.get<std::string>("navigation", "policy", "efficient"));
  c.tick = r.get("navigation", "tick", c.tick);
  c.max_time = r.get("navigation", "max_time", c.max_time);
  c.thresholds.replans_up = r.get("navigation", "replans_up", c.thresholds.replans_up);
  c.thresholds.window = r.get("navigation", "replan_window", c.thresholds.window);
  c.thresholds.hazard_density_up =
      r.get("navigation", "hazard_density_up", c.thresholds.hazard_density_up);
  c.thresholds.hazard_free_down =
      r.get("navigation", "hazard_free_down", c.thresholds.hazard_free_down);

  SlamConfig& s = c.slam;
  s.camera.height = 1.5;
  s.camera.pitch_down = deg2rad(35.0);
  s.camera.mount = {0.3, 0.0};
  s.camera.rows = 40;
  s.camera.cols = 80;
  s.camera.near = 1.5;
  s.camera.far = 6.0;
  s.camera.width = 4.0;
  read_camera(r, "navcam", s.camera);
  s.particles = r.get("slam", "particles", s.particles);
  s.resample_threshold = r.get("slam", "ess_threshold", s.resample_threshold);
  s.top_fraction = r.get("slam", "top_fraction", s.top_fraction);
  s.sigma_z = r.get("slam", "sigma_z", s.sigma_z);
  s.match_sigma = r.get("slam", "match_sigma", s.match_sigma);
  s.score_range = r.get("slam", "score_range", s.score_range);
  s.map_size = r.get("slam", "map_size", s.map_size);
  s.map_resolution = r.get("slam", "map_resolution", s.map_resolution);
  s.update_distance = r.get("slam", "update_distance", s.update_distance);
  s.init_sigma_xy = r.get("slam", "init_sigma_xy", s.init_sigma_xy);
  s.init_sigma_heading = r.get("slam", "init_sigma_heading", s.init_sigma_heading);
  s.motion_sigma_forward = r.get("slam", "motion_sigma_forward", s.motion_sigma_forward);
  s.motion_sigma_lateral = r.get("slam", "motion_sigma_lateral", s.motion_sigma_lateral);
  s.motion_sigma_heading = r.get("slam", "motion_sigma_heading", s.motion_sigma_heading);
  s.cloud_points = r.get("slam", "cloud_points", s.cloud_points);

  GlobalConfig& g = c.global;
  g.orbital_resolution = r.get("global", "orbital_resolution", g.orbital_resolution);
  g.interval = r.get("global", "interval", g.interval);
  g.params.gate = r.get("global", "gate", g.params.gate);
  g.params.min_relief_variance = r.get("global", "relief_trigger", g.params.min_relief_variance);
  g.params.match.min_sharpness = r.get("global", "min_sharpness", g.params.match.min_sharpness);
  g.params.match.min_valid_fraction =
      r.get("global", "min_valid_fraction", g.params.match.min_valid_fraction);
  g.params.match.mode =
      parse_correlation_mode(r.get<std::string>("global", "correlation", "raw"));

  if (r.has("initial", "x") || r.has("initial", "y") || r.has("initial", "heading_deg")) {
    RoverPose p;
    p.x = r.require<double>("initial", "x");
    p.y = r.require<double>("initial", "y");
    p.heading = deg2rad(r.require<double>("initial", "heading_deg"));
    c.initial.pose = p;
  }
  c.initial.offset_magnitude = r.get("initial", "offset", c.initial.offset_magnitude);
  if (r.has("initial", "offset_direction_deg")) {
    c.initial.offset_direction = deg2rad(r.get("initial", "offset_direction_deg", 0.0));
  }

  c.output_dir = resolve(base_dir, r.get<std::string>("output", "dir", "out"));

  r.check_unknown();

  if (!(c.tick > 0.0) || !(c.max_time > 0.0)) throw ConfigError("tick and max_time must be > 0");
  if (n.drift_rate < 0.0 || n.drift_rate > 0.1) {
    throw ConfigError("drift_rate must be within [0, 0.1]");
  }
  if (s.particles < 1) throw ConfigError("slam needs at least one particle");
  if (!(s.update_distance > 0.0)) throw ConfigError("slam update distance must be positive");
  if (!(s.sigma_z > 0.0) || !(s.match_sigma > 0.0)) throw ConfigError("slam sigmas must be positive");
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  ScenarioConfig c = parse_scenario(in, path.parent_path());
  return c;
}

void override_seeds(ScenarioConfig& config, std::uint64_t seed) {
  config.noise.odometry_seed = mix_seed(seed, 1);
  config.noise.depth_seed = mix_seed(seed, 2);
  config.noise.filter_seed = mix_seed(seed, 3);
}

}  // namespace rover_gnc
