#include "rover_gnc/mission.hpp"

#include "rover_gnc/dem_io.hpp"
#include "rover_gnc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace rover_gnc {

double compute_overhead(double traversed, double planned) {
  if (!(planned > 0.0)) return 0.0;
  return traversed / planned - 1.0;
}

ElevationGrid build_terrain(const ScenarioConfig& config) {
  ElevationGrid base = config.dem_path ? read_esri_ascii(*config.dem_path)
                                       : generate_terrain(config.terrain_seed, config.terrain);
  return config.obstacles.empty() ? base : place_obstacles(base, config.obstacles);
}

CalibrationTable calibrate_scenario(const ScenarioConfig& config) {
  const CameraModel cam(config.hazard.camera);
  GridGeometry g;
  g.resolution = 0.05;
  g.rows = g.cols = 161;
  g.origin = Eigen::Vector2d(-4.0, -4.0);
  const ElevationGrid flat(g, 0.0);
  const DepthFrame frame = render_depth(RoverPose{}, cam, flat);
  return calibrate(frame, cam.height(), config.hazard.t_near, config.hazard.t_far,
                   cam.corner_pairs());
}

namespace {

std::vector<Eigen::Vector3d> subsample(const std::vector<Eigen::Vector3d>& cloud,
                                       std::size_t target) {
  if (target == 0 || cloud.size() <= target) return cloud;
  const std::size_t stride = (cloud.size() + target - 1) / target;
  std::vector<Eigen::Vector3d> out;
  out.reserve(cloud.size() / stride + 1);
  for (std::size_t k = 0; k < cloud.size(); k += stride) out.push_back(cloud[k]);
  return out;
}

std::vector<Eigen::Vector3d> level_to_world(const std::vector<Eigen::Vector3d>& level,
                                            const RoverPose& pose) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  std::vector<Eigen::Vector3d> out;
  out.reserve(level.size());
  for (const auto& q : level) {
    out.emplace_back(pose.x + c * q.x() - s * q.y(), pose.y + s * q.x() + c * q.y(),
                     pose.z + q.z());
  }
  return out;
}

TraversabilityGrid make_hazard_memory(const ElevationGrid& terrain, double res) {
  GridGeometry g;
  g.resolution = res;
  const double pad = 10.0;
  const Eigen::Vector2d lo = terrain.origin() - Eigen::Vector2d::Constant(pad);
  const Eigen::Vector2d hi = terrain.geometry().max_center() + Eigen::Vector2d::Constant(pad);
  g.origin = (lo / res).array().floor().matrix() * res;
  g.cols = static_cast<int>(std::ceil((hi.x() - g.origin.x()) / res)) + 1;
  g.rows = static_cast<int>(std::ceil((hi.y() - g.origin.y()) / res)) + 1;
  return TraversabilityGrid(g, GridFrame::kWorld);
}

// Path that leaves the current position and merges onto the global path a
// little ahead of the closest point.
Polyline realign_path(const Eigen::Vector2d& from, const GlobalPath& global, double s_from,
                      double lead) {
  const double s_join = std::min(s_from + lead, global.path.length());
  std::vector<Eigen::Vector2d> pts{from};
  const Eigen::Vector2d join = global.path.point_at(s_join);
  if ((join - from).norm() > 1e-9) pts.push_back(join);
  const auto& g = global.path.points();
  for (std::size_t i = global.path.segment_at(s_join) + 1; i < g.size(); ++i) {
    if ((g[i] - pts.back()).norm() > 1e-9) pts.push_back(g[i]);
  }
  if (pts.size() == 1) pts.push_back(global.path.points().back());
  return Polyline(std::move(pts));
}

class Mission {
 public:
  explicit Mission(const ScenarioConfig& config) : cfg_(config), selector_(config.policy, config.thresholds) {}

  RunResult run();

 private:
  void log(const std::string& message) {
    result_.events.push_back(fmt::format("t={:.1f} {}", t_, message));
  }
  void record_row() {
    result_.trajectory.push_back({t_, truth_, estimate_, selector_.mode()});
  }

  void sense_hazards();
  bool handle_blockage();  // false: mission must stop
  void start_slam();
  void slam_update();
  void global_correction();
  void finish();

  const ScenarioConfig& cfg_;
  RunResult result_;
  ModeSelector selector_;

  ElevationGrid terrain_;
  std::optional<ElevationGrid> orbital_;
  GlobalPath global_;
  Polyline active_;
  double progress_ = 0.0;         // arc length on the active path
  double global_progress_ = 0.0;  // arc length on the global path

  CameraModel loccam_;
  CameraModel navcam_;
  CalibrationTable calibration_;
  PerspectiveTransform pixel_to_ground_;
  TraversabilityGrid memory_;
  bool seeing_hazard_ = false;

  RoverPose truth_;
  RoverPose estimate_;
  RoverPose odometry_only_;
  double t_ = 0.0;
  std::uint64_t tick_ = 0;
  double odometer_ = 0.0;            // truth, planar
  double estimated_odometer_ = 0.0;  // from odometry

  // Full navigation state.
  bool slam_active_ = false;
  std::optional<LocalRollingMap> map_;
  ParticleSet particles_;
  RoverPose slam_accumulated_;
  double slam_distance_ = 0.0;
  std::uint64_t slam_updates_ = 0;
  double last_global_ = 0.0;
};

void Mission::sense_hazards() {
  const DepthFrame depth =
      render_depth(truth_, loccam_, terrain_,
                   {cfg_.noise.depth_sigma, mix_seed(cfg_.noise.depth_seed, tick_)});
  const HazardMask mask = detect(depth, calibration_, cfg_.hazard.min_cluster);
  const bool was_seeing = seeing_hazard_;
  seeing_hazard_ = mask.any_hazard();
  if (!seeing_hazard_) return;
  const TraversabilityGrid local = project_hazards(mask, pixel_to_ground_, estimate_,
                                                   cfg_.hazard.safety_margin,
                                                   cfg_.hazard.grid_resolution);
  memory_.merge(local);
  selector_.record_hazard(estimated_odometer_);
  if (!was_seeing) {
    log(fmt::format("hazard in view: {} positive, {} negative pixels",
                    mask.count(PixelClass::kPositive), mask.count(PixelClass::kNegative)));
  }
}

bool Mission::handle_blockage() {
  const double from = progress_ + cfg_.hazard.rover_radius;
  const auto blocked =
      first_blocked_arclength(active_, memory_, from, progress_ + cfg_.hazard.horizon);
  if (!blocked) return true;
  RepairOptions options = cfg_.repair;
  options.from_arclength = global_progress_;
  // Plan with the extra inflation first; near a hazard it can enclose the
  // rover, so fall back to the plain safety margin.
  std::vector<double> margins{cfg_.hazard.planning_margin};
  if (cfg_.hazard.planning_margin > 0.0) margins.push_back(0.0);
  for (std::size_t attempt = 0; attempt < margins.size(); ++attempt) {
    TraversabilityGrid planning = memory_;
    if (margins[attempt] > 0.0) planning.dilate(margins[attempt]);
    planning.clear_disc(estimate_.position(), cfg_.hazard.rover_radius);
    try {
      const RepairedPath detour = repair(estimate_, global_, planning, options);
      active_ = splice(detour, global_);
      progress_ = 0.0;
      ++result_.metrics.replans;
      selector_.record_replan(estimated_odometer_);
      log(fmt::format(
          "replan #{} blocked at s={:.2f}, detour of {} waypoints rejoins at s={:.2f}{}",
          result_.metrics.replans, *blocked, detour.waypoints.size(), detour.rejoin_arclength,
          attempt > 0 ? " (without planning margin)" : ""));
      return true;
    } catch (const PathBlockedError& e) {
      if (attempt + 1 < margins.size()) continue;
      log(std::string("path blocked: ") + e.what());
      result_.metrics.status = "path_blocked";
      return false;
    }
  }
  return true;
}

void Mission::start_slam() {
  const SlamConfig& s = cfg_.slam;
  const int cells = static_cast<int>(std::lround(s.map_size / s.map_resolution));
  map_.emplace(estimate_.position(), cells, cells, s.map_resolution, orbital_->origin());
  particles_ = init_particles(estimate_, s.particles, s.init_sigma_xy, s.init_sigma_heading,
                              mix_seed(cfg_.noise.filter_seed, 0), s.resample_threshold);
  slam_accumulated_ = RoverPose{};
  slam_distance_ = 0.0;
  slam_active_ = true;
  last_global_ = estimated_odometer_;
  log("slam started");
  slam_update();
}

void Mission::slam_update() {
  const SlamConfig& s = cfg_.slam;
  ++slam_updates_;
  if (slam_distance_ > 0.0) {
    const OdometryDelta delta = delta_between(RoverPose{}, slam_accumulated_);
    const double scale = std::sqrt(slam_distance_);
    predict(particles_, delta,
            {s.motion_sigma_forward * scale, s.motion_sigma_lateral * scale,
             s.motion_sigma_heading * scale},
            mix_seed(cfg_.noise.filter_seed, 2 * slam_updates_));
  }
  const DepthFrame depth = render_depth(
      truth_, navcam_, terrain_,
      {cfg_.noise.depth_sigma, mix_seed(cfg_.noise.depth_seed, (1ULL << 40) + slam_updates_)});
  const std::vector<Eigen::Vector3d> cloud =
      render_level_cloud(depth, navcam_, truth_.roll, truth_.pitch);

  if (map_->valid_count() > 0 && slam_distance_ > 0.0) {
    std::vector<Eigen::Vector3d> overlap;
    for (const auto& q : cloud) {
      if (q.x() <= s.score_range) overlap.push_back(q);
    }
    const std::vector<Eigen::Vector3d> scan = subsample(overlap, s.cloud_points);
    const ScanMatchParams params{s.match_sigma, estimate_.z};
    std::vector<double> scores(particles_.size());
    for (std::size_t k = 0; k < particles_.size(); ++k) {
      scores[k] = log_score_scan(particles_.particles[k], scan, *map_, params);
    }
    try {
      update_weights_from_log_scores(particles_, scores,
                                  mix_seed(cfg_.noise.filter_seed, 2 * slam_updates_ + 1));
    } catch (const FilterDivergenceError& e) {
      log(std::string("filter reinitialized: ") + e.what());
      particles_ = init_particles(estimate_, s.particles, s.init_sigma_xy,
                                  s.init_sigma_heading,
                                  mix_seed(cfg_.noise.filter_seed, 2 * slam_updates_ + 1),
                                  s.resample_threshold);
    }
    const RoverPose fused = estimate_pose(particles_, s.top_fraction);
    estimate_.x = fused.x;
    estimate_.y = fused.y;
    estimate_.heading = fused.heading;
  }
  fuse_observation(*map_, level_to_world(cloud, estimate_), s.sigma_z);
  map_->shift_to(estimate_.position());
  slam_accumulated_ = RoverPose{};
  slam_distance_ = 0.0;
}

void Mission::global_correction() {
  last_global_ = estimated_odometer_;
  GlobalCorrectionOutcome outcome;
  try {
    outcome = run_global_correction(*map_, *orbital_, estimate_, cfg_.global.params);
  } catch (const InsufficientDataError& e) {
    log(std::string("global correction skipped: ") + e.what());
    return;
  }
  if (!outcome.triggered) {
    log(fmt::format("global correction skipped: relief variance {:.4f}",
                    outcome.relief_variance));
    return;
  }
  if (outcome.match) log(match_summary(*outcome.match));
  const Correction& c = outcome.correction;
  if (!c.applied) {
    log("correction not applied: " + c.diagnostic);
    return;
  }
  const Eigen::Vector2d off = c.offset;
  estimate_.x = c.pose.x;
  estimate_.y = c.pose.y;
  for (auto& p : particles_.particles) {
    p.x += off.x();
    p.y += off.y();
  }
  map_->translate_frame(off);
  map_->shift_to(estimate_.position());
  // Hazards were stored in the old frame.
  memory_ = make_hazard_memory(terrain_, cfg_.hazard.grid_resolution);
  const auto proj = global_.path.project(estimate_.position());
  global_progress_ = proj.arclength;
  active_ = realign_path(estimate_.position(), global_, global_progress_,
                         std::max(cfg_.control.lookahead, proj.distance));
  progress_ = 0.0;
  const double err = (estimate_.position() - truth_.position()).norm();
  result_.metrics.correction_errors.push_back(err);
  log(fmt::format("correction applied dx={:.3f} dy={:.3f}, error after correction {:.3f} m",
                  off.x(), off.y(), err));
}

RunResult Mission::run() {
  RunMetrics& m = result_.metrics;
  m.scenario = cfg_.name;

  terrain_ = build_terrain(cfg_);
  global_ = load_global_path(cfg_.path_file, cfg_.corridor);
  active_ = global_.path;
  m.planned_length = global_.path.length();
  loccam_ = CameraModel(cfg_.hazard.camera);
  navcam_ = CameraModel(cfg_.slam.camera);
  calibration_ = calibrate_scenario(cfg_);
  pixel_to_ground_ = fit_perspective(calibration_.corners);
  memory_ = make_hazard_memory(terrain_, cfg_.hazard.grid_resolution);
  if (cfg_.policy != ModePolicy::kEfficientOnly) {
    orbital_ = derive_orbital_map(terrain_, cfg_.global.orbital_resolution);
  }

  const auto& pts = global_.path.points();
  if (cfg_.initial.pose) {
    truth_ = *cfg_.initial.pose;
  } else {
    truth_.x = pts[0].x();
    truth_.y = pts[0].y();
    truth_.heading = std::atan2(pts[1].y() - pts[0].y(), pts[1].x() - pts[0].x());
  }
  truth_.heading = normalize_angle(truth_.heading);
  truth_ = settle_on_terrain(truth_, terrain_);
  estimate_ = truth_;
  if (cfg_.initial.offset_magnitude > 0.0) {
    double dir = 0.0;
    if (cfg_.initial.offset_direction) {
      dir = *cfg_.initial.offset_direction;
    } else {
      std::mt19937_64 rng(mix_seed(cfg_.noise.odometry_seed, 0xD1F7));
      dir = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
    }
    estimate_.x += cfg_.initial.offset_magnitude * std::cos(dir);
    estimate_.y += cfg_.initial.offset_magnitude * std::sin(dir);
    log(fmt::format("initial estimate offset {:.3f} m toward {:.1f} deg",
                    cfg_.initial.offset_magnitude, rad2deg(dir)));
  }
  odometry_only_ = estimate_;
  // The windowed projections below start from here, so seed them with a
  // search over the whole path.
  global_progress_ = global_.path.project(estimate_.position()).arclength;
  progress_ = active_.project(estimate_.position()).arclength;
  log(fmt::format("start mode={} policy={} planned={:.3f} m", to_string(selector_.mode()),
                  to_string(cfg_.policy), m.planned_length));
  record_row();

  FdirMonitor fdir(cfg_.fdir);
  const std::size_t slip_ticks =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg_.slip_window / cfg_.tick)));
  std::deque<std::pair<double, double>> slip_history;  // (commanded, estimated) distance

  while (true) {
    if (selector_.mode() == NavMode::kFull && !slam_active_) start_slam();

    try {
      if (cfg_.hazard.enabled) sense_hazards();
    } catch (const GeometryFault& e) {
      log(std::string("geometry fault: ") + e.what());
      m.status = "geometry_fault";
      break;
    }
    if (cfg_.hazard.enabled && !handle_blockage()) break;

    global_progress_ = std::max(
        global_progress_,
        global_.path.project(estimate_.position(), global_progress_, global_progress_ + 5.0)
            .arclength);
    const ControlCommand cmd = control_step(estimate_, active_, cfg_.control, &progress_);
    if (cmd.speed == 0.0 && cmd.turn_rate == 0.0) {
      const Eigen::Vector2d goal = active_.points().back();
      if ((goal - estimate_.position()).norm() <= cfg_.control.goal_tolerance) {
        log("goal reached");
        break;
      }
    }
    if (t_ >= cfg_.max_time) {
      log("time limit reached");
      m.status = "timeout";
      break;
    }

    RoverPose next;
    try {
      next = step_kinematics(truth_, cmd, cfg_.tick, terrain_);
    } catch (const OutOfBoundsError& e) {
      log(std::string("left the terrain: ") + e.what());
      m.status = "out_of_bounds";
      break;
    }
    const OdometryDelta true_delta = delta_between(truth_, next);
    const OdometryDelta measured = simulate_odometry(
        true_delta, mix_seed(cfg_.noise.odometry_seed, tick_), cfg_.noise.drift_rate);
    odometer_ += (next.position() - truth_.position()).norm();
    estimated_odometer_ += std::abs(measured.forward);
    truth_ = next;
    estimate_ = compose(estimate_, measured);
    odometry_only_ = compose(odometry_only_, measured);
    // Attitude comes from the inertial sensor.
    estimate_.roll = truth_.roll;
    estimate_.pitch = truth_.pitch;
    ++tick_;
    t_ = static_cast<double>(tick_) * cfg_.tick;

    slip_history.emplace_back(std::abs(cmd.speed) * cfg_.tick, measured.forward);
    if (slip_history.size() > slip_ticks) slip_history.pop_front();
    OdometryDelta commanded_sum;
    OdometryDelta estimated_sum;
    for (const auto& [c, e] : slip_history) {
      commanded_sum.forward += c;
      estimated_sum.forward += e;
    }
    const double deviation =
        active_.project(estimate_.position(), std::max(0.0, progress_ - 1.0), progress_ + 3.0)
            .distance;
    fdir.update(estimated_sum, commanded_sum, estimate_, deviation, cmd.speed);
    if (fdir.faulted()) {
      const FdirState& st = fdir.state();
      log(fmt::format("fdir {}: slip={:.3f} roll={:.2f} pitch={:.2f} deviation={:.2f}",
                      to_string(st.latch), st.slip_ratio, rad2deg(truth_.roll),
                      rad2deg(truth_.pitch), deviation));
      m.status = to_string(st.latch);
      record_row();
      break;
    }

    if (slam_active_) {
      slam_accumulated_ = compose(slam_accumulated_, measured);
      slam_distance_ += std::abs(measured.forward);
      if (slam_distance_ >= cfg_.slam.update_distance) slam_update();
      if (estimated_odometer_ - last_global_ >= cfg_.global.interval) global_correction();
    }

    if (const auto cause = selector_.update(estimated_odometer_)) {
      const std::string entry = fmt::format("t={:.1f} {} ({})", t_, to_string(selector_.mode()),
                                            *cause);
      m.mode_switches.push_back(entry);
      log("mode switch to " + to_string(selector_.mode()) + ": " + *cause);
      if (selector_.mode() == NavMode::kEfficient) {
        slam_active_ = false;
        map_.reset();
      }
    }
    record_row();
  }
  finish();
  return std::move(result_);
}

void Mission::finish() {
  RunMetrics& m = result_.metrics;
  m.traversed_length = odometer_;
  m.overhead = compute_overhead(odometer_, m.planned_length);
  m.final_error = (estimate_.position() - truth_.position()).norm();
  m.odometry_error = (odometry_only_.position() - truth_.position()).norm();
  if (odometer_ > 0.0) {
    m.final_error_pct = 100.0 * m.final_error / odometer_;
    m.odometry_error_pct = 100.0 * m.odometry_error / odometer_;
  } else if (!m.faulted()) {
    m.status = "zero_length";
  }
  m.duration = t_;
  log(fmt::format("end status={} traversed={:.3f} replans={} final_error={:.3f}", m.status,
                  m.traversed_length, m.replans, m.final_error));
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) { return Mission(config).run(); }

void write_metrics_csv(std::ostream& out, const RunMetrics& m) {
  out << "scenario,status,planned_m,traversed_m,overhead,replans,final_error_m,"
         "final_error_pct,odometry_error_m,odometry_error_pct,corrections,"
         "correction_errors_m,mode_switches,duration_s\n";
  std::string corrections;
  for (std::size_t i = 0; i < m.correction_errors.size(); ++i) {
    if (i > 0) corrections += ';';
    corrections += fmt::format("{:.6f}", m.correction_errors[i]);
  }
  out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{},{:.1f}\n",
                     m.scenario, m.status, m.planned_length, m.traversed_length, m.overhead,
                     m.replans, m.final_error, m.final_error_pct, m.odometry_error,
                     m.odometry_error_pct, m.correction_errors.size(), corrections,
                     m.mode_switches.size(), m.duration);
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "t,truth_x,truth_y,truth_heading,est_x,est_y,est_heading,mode\n";
  for (const auto& r : rows) {
    out << fmt::format("{:.1f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.t, r.truth.x,
                       r.truth.y, r.truth.heading, r.estimate.x, r.estimate.y,
                       r.estimate.heading, to_string(r.mode));
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::vector<TrajectoryRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trajectory file");
  if (line.rfind("t,truth_x", 0) != 0) throw IoError("not a trajectory file: bad header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    TrajectoryRow r;
    std::string mode;
    if (!(ls >> r.t >> r.truth.x >> r.truth.y >> r.truth.heading >> r.estimate.x >>
          r.estimate.y >> r.estimate.heading >> mode)) {
      throw IoError("malformed trajectory line " + std::to_string(lineno));
    }
    if (mode == "full") {
      r.mode = NavMode::kFull;
    } else if (mode == "efficient") {
      r.mode = NavMode::kEfficient;
    } else {
      throw IoError("unknown mode '" + mode + "' on line " + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

void emit_metrics(const RunResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("metrics.csv");
    write_metrics_csv(out, result.metrics);
  }
  {
    auto out = open("trajectory.csv");
    write_trajectory_csv(out, result.trajectory);
  }
  {
    auto out = open("events.log");
    for (const auto& e : result.events) out << e << '\n';
    if (!out) throw IoError("failed writing events.log");
  }
}

}  // namespace rover_gnc
