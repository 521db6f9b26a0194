#pragma once

#include "rover_gnc/global_localizer.hpp"
#include "rover_gnc/hazard_detector.hpp"
#include "rover_gnc/mode_selector.hpp"
#include "rover_gnc/path_repair.hpp"
#include "rover_gnc/rover_sim.hpp"
#include "rover_gnc/slam.hpp"
#include "rover_gnc/terrain.hpp"
#include "rover_gnc/trajectory_control.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rover_gnc {

struct HazardConfig {
  CameraGeometry camera;  // LocCam region of interest
  double t_near = 0.10;
  double t_far = 0.10;
  int min_cluster = kDefaultMinCluster;
  double safety_margin = 0.6;    // dilation radius, meters
  /// Extra inflation used only when planning a detour, so that hazard cells
  /// revealed next to known ones do not immediately block the new path.
  double planning_margin = 0.4;
  double grid_resolution = 0.1;  // hazard memory cells
  double horizon = 2.5;          // look-ahead along the active path for blockage
  double rover_radius = 0.3;     // cleared around the rover before planning
  bool enabled = true;
};

struct SlamConfig {
  CameraGeometry camera;  // NavCam
  std::size_t particles = 200;
  double resample_threshold = 0.5;
  double top_fraction = 0.1;
  double sigma_z = 0.05;      // height noise used for map fusion
  /// Sigma of the scan score. The score averages over points, so this acts
  /// as a temperature and is much smaller than the per-point noise.
  double match_sigma = 0.05;
  double map_size = 20.0;  // meters, square
  double map_resolution = 0.1;
  double update_distance = 0.5;
  double init_sigma_xy = 0.05;
  double init_sigma_heading = 0.01;
  /// Motion noise per meter travelled (sigma grows with sqrt of the step).
  double motion_sigma_forward = 0.02;
  double motion_sigma_lateral = 0.02;
  double motion_sigma_heading = 0.01;
  std::size_t cloud_points = 600;  // subsample used for scoring
  /// Only points up to this rover-frame x are scored. Points beyond the area
  /// mapped by earlier scans would fall off valid cells for some particles and
  /// bias the per-point mean towards them.
  double score_range = 4.5;
};

struct GlobalConfig {
  double orbital_resolution = 0.5;
  double interval = 25.0;  // meters between correction attempts
  GlobalCorrectionParams params;
};

struct NoiseConfig {
  std::uint64_t odometry_seed = 0;
  std::uint64_t depth_seed = 0;
  std::uint64_t filter_seed = 0;
  double drift_rate = 0.0;
  double depth_sigma = 0.005;  // relative
};

struct InitialConfig {
  std::optional<RoverPose> pose;  // default: path start, facing the second waypoint
  /// Error injected into the initial estimate (meters).
  double offset_magnitude = 0.0;
  /// Direction in radians; when absent it is drawn from the odometry seed.
  std::optional<double> offset_direction;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path base_dir;  // directory of the scenario file

  std::uint64_t terrain_seed = 0;
  TerrainSpec terrain;
  std::optional<std::filesystem::path> dem_path;
  std::vector<ObstacleSpec> obstacles;

  std::filesystem::path path_file;
  double corridor = 1.5;

  HazardConfig hazard;
  RepairOptions repair;
  ControlParams control;
  FdirLimits fdir;
  double slip_window = 1.0;  // seconds

  NoiseConfig noise;
  ModePolicy policy = ModePolicy::kEfficientOnly;
  ModeThresholds thresholds;
  double tick = 0.1;
  double max_time = 1200.0;

  SlamConfig slam;
  GlobalConfig global;
  InitialConfig initial;

  std::filesystem::path output_dir = "out";
};

/// Parses the sectioned key/value scenario format. Relative file paths are
/// resolved against `base_dir`. Throws ConfigError.
ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Replaces every noise seed with a stream of `seed`.
void override_seeds(ScenarioConfig& config, std::uint64_t seed);

struct TrajectoryRow {
  double t = 0.0;
  RoverPose truth;
  RoverPose estimate;
  NavMode mode = NavMode::kEfficient;
};

struct RunMetrics {
  std::string scenario;
  std::string status = "ok";  // "ok" or the fault name
  double planned_length = 0.0;
  double traversed_length = 0.0;
  double overhead = 0.0;
  int replans = 0;
  double final_error = 0.0;
  double final_error_pct = 0.0;  // of traversed length
  double odometry_error = 0.0;   // dead-reckoning-only estimate, same noise
  double odometry_error_pct = 0.0;
  std::vector<double> correction_errors;  // truth distance after each applied correction
  std::vector<std::string> mode_switches;
  double duration = 0.0;

  bool faulted() const { return status != "ok"; }
};

struct RunResult {
  RunMetrics metrics;
  std::vector<TrajectoryRow> trajectory;
  std::vector<std::string> events;
};

/// traversed / planned - 1.
double compute_overhead(double traversed, double planned);

/// The terrain the scenario runs on (generated or loaded, obstacles placed).
ElevationGrid build_terrain(const ScenarioConfig& config);

/// Flat-ground calibration of the LocCam for this configuration.
CalibrationTable calibrate_scenario(const ScenarioConfig& config);

RunResult run_scenario(const ScenarioConfig& config);

/// Writes metrics.csv, trajectory.csv and events.log into `dir`.
/// Throws IoError when the directory cannot be written.
void emit_metrics(const RunResult& result, const std::filesystem::path& dir);

void write_metrics_csv(std::ostream& out, const RunMetrics& metrics);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);

}  // namespace rover_gnc
