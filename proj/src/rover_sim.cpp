#include "rover_gnc/rover_sim.hpp"

#include "rover_gnc/errors.hpp"

#include <cmath>
#include <random>

namespace rover_gnc {

Eigen::Matrix3d body_to_world(const RoverPose& pose) {
  return (Eigen::AngleAxisd(pose.heading, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(-pose.pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(pose.roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Matrix3d body_to_level(double roll, double pitch) {
  return (Eigen::AngleAxisd(-pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

RoverPose settle_on_terrain(RoverPose pose, const ElevationGrid& truth) {
  const Eigen::Vector2d p = pose.position();
  if (!truth.geometry().in_center_hull(p)) {
    throw OutOfBoundsError("rover left the terrain extent");
  }
  pose.heading = normalize_angle(pose.heading);
  pose.z = sample_height(truth, p);
  const Eigen::Vector2d grad = terrain_gradient(truth, p, 0.5 * kAttitudeBaseline);
  const Eigen::Vector2d fwd(std::cos(pose.heading), std::sin(pose.heading));
  const Eigen::Vector2d left(-fwd.y(), fwd.x());
  pose.pitch = std::atan(grad.dot(fwd));
  pose.roll = std::atan(grad.dot(left));
  return pose;
}

RoverPose step_kinematics(const RoverPose& pose, const ControlCommand& cmd, double dt,
                          const ElevationGrid& truth) {
  if (!(dt > 0.0)) throw ContractError("kinematics step requires dt > 0");
  RoverPose next = pose;
  const double v = cmd.speed;
  const double w = cmd.turn_rate;
  const double h0 = pose.heading;
  if (std::abs(w) < 1e-12) {
    next.x += v * dt * std::cos(h0);
    next.y += v * dt * std::sin(h0);
  } else {
    const double h1 = h0 + w * dt;
    next.x += v / w * (std::sin(h1) - std::sin(h0));
    next.y -= v / w * (std::cos(h1) - std::cos(h0));
  }
  next.heading = normalize_angle(h0 + w * dt);
  if (v == 0.0 && w == 0.0) return next;
  return settle_on_terrain(next, truth);
}

RoverPose compose(const RoverPose& pose, const OdometryDelta& delta) {
  RoverPose out = pose;
  const double mid = pose.heading + 0.5 * delta.heading_change;
  const double c = std::cos(mid);
  const double s = std::sin(mid);
  out.x += delta.forward * c - delta.lateral * s;
  out.y += delta.forward * s + delta.lateral * c;
  out.z += delta.vertical;
  out.heading = normalize_angle(pose.heading + delta.heading_change);
  return out;
}

OdometryDelta delta_between(const RoverPose& from, const RoverPose& to) {
  OdometryDelta d;
  d.heading_change = normalize_angle(to.heading - from.heading);
  const double mid = from.heading + 0.5 * d.heading_change;
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  d.forward = dx * std::cos(mid) + dy * std::sin(mid);
  d.lateral = -dx * std::sin(mid) + dy * std::cos(mid);
  d.vertical = to.z - from.z;
  return d;
}

OdometryDelta simulate_odometry(const OdometryDelta& true_delta, std::uint64_t seed,
                                double drift_rate) {
  if (!(drift_rate >= 0.0 && drift_rate <= 0.1)) {
    throw ContractError("odometry drift rate must be within [0, 0.1]");
  }
  OdometryDelta out = true_delta;
  out.drift_rate = drift_rate;
  const double dist = std::hypot(true_delta.forward, true_delta.lateral);
  if (drift_rate == 0.0 || dist == 0.0) return out;

  // Heading random walk with variance q per meter gives a lateral error of
  // variance q * D^3 / 3; q is chosen so E|error| = drift_rate * D at the
  // reference distance.
  const double heading_scale = std::sqrt(3.0 * kPi / (2.0 * kDriftReferenceDistance));
  const double root = std::sqrt(dist);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double n_forward = normal(rng);
  const double n_heading = normal(rng);
  const double n_vertical = normal(rng);
  out.forward += drift_rate * root * n_forward;
  out.heading_change += drift_rate * root * heading_scale * n_heading;
  out.vertical += 0.1 * drift_rate * root * n_vertical;
  return out;
}

CameraModel::CameraModel(const CameraGeometry& geometry) : geometry_(geometry) {
  const CameraGeometry& g = geometry_;
  if (!(g.height > 0.0)) throw ConfigError("camera height must be positive");
  if (!(g.pitch_down > 0.0 && g.pitch_down < 0.5 * kPi)) {
    throw ConfigError("camera pitch-down must be in (0, 90) degrees");
  }
  if (g.rows < 2 || g.cols < 2) throw ConfigError("camera RoI needs at least 2x2 pixels");
  if (!(g.near > g.mount.x() && g.far > g.near)) {
    throw ConfigError("camera footprint must lie ahead of the mount, near < far");
  }
  if (!(g.width > 0.0) || !(g.max_range > 0.0)) {
    throw ConfigError("camera footprint width and range must be positive");
  }

  const double beta = g.pitch_down;
  camera_to_body_ = Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()).toRotationMatrix();

  // Image-plane coordinate v (down-positive) that looks at flat ground a
  // horizontal distance `d` ahead of the camera.
  auto v_for = [&](double d) { return std::tan(std::atan(g.height / d) - beta); };
  const double v_top = v_for(g.far - g.mount.x());
  const double v_bottom = v_for(g.near - g.mount.x());
  const double v_mid = 0.5 * (v_top + v_bottom);
  const double t_mid = g.height / (std::sin(beta) + v_mid * std::cos(beta));
  const double u_max = 0.5 * g.width / t_mid;

  rays_.resize(static_cast<std::size_t>(g.rows) * g.cols);
  for (int r = 0; r < g.rows; ++r) {
    const double v = v_top + (v_bottom - v_top) * r / (g.rows - 1);
    for (int c = 0; c < g.cols; ++c) {
      const double u = -u_max + 2.0 * u_max * c / (g.cols - 1);
      rays_[static_cast<std::size_t>(r) * g.cols + c] = Eigen::Vector3d(1.0, -u, -v).normalized();
    }
  }
}

Eigen::Vector2d CameraModel::flat_ground_point(int row, int col) const {
  const Eigen::Vector3d d = body_ray(row, col);
  const double t = geometry_.height / -d.z();
  return (body_origin() + t * d).head<2>();
}

double CameraModel::flat_ground_distance(int row, int col) const {
  return geometry_.height / -body_ray(row, col).z();
}

std::array<std::pair<Eigen::Vector2d, Eigen::Vector2d>, 4> CameraModel::corner_pairs() const {
  const int r1 = rows() - 1;
  const int c1 = cols() - 1;
  const std::array<GridIndex, 4> corners = {GridIndex{0, 0}, GridIndex{0, c1},
                                            GridIndex{r1, c1}, GridIndex{r1, 0}};
  std::array<std::pair<Eigen::Vector2d, Eigen::Vector2d>, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    out[k] = {Eigen::Vector2d(corners[k].col, corners[k].row),
              flat_ground_point(corners[k].row, corners[k].col)};
  }
  return out;
}

DepthFrame render_depth(const RoverPose& pose, const CameraModel& cam,
                        const ElevationGrid& truth, const DepthNoise& noise) {
  const Eigen::Matrix3d rot = body_to_world(pose);
  const Eigen::Vector3d origin = Eigen::Vector3d(pose.x, pose.y, pose.z) + rot * cam.body_origin();
  const auto ground = truth.try_height_at(origin.head<2>());
  if (!ground || origin.z() <= *ground) {
    throw GeometryFault("camera is not above the terrain");
  }

  const double step = 0.5 * truth.resolution();
  constexpr double kBisectionTolerance = 1e-3;
  DepthFrame frame(cam.rows(), cam.cols());

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int r = 0; r < cam.rows(); ++r) {
    for (int c = 0; c < cam.cols(); ++c) {
      const Eigen::Vector3d dir = rot * cam.body_ray(r, c);
      // Signed clearance of the ray point above the terrain.
      auto clearance = [&](double t, double& out) {
        const Eigen::Vector3d p = origin + t * dir;
        const auto h = truth.try_height_at(p.head<2>());
        if (!h) return false;
        out = p.z() - *h;
        return true;
      };

      double t_lo = 0.0;
      double f_lo = origin.z() - *ground;
      bool hit = false;
      bool lost = false;
      double t_hi = 0.0;
      double f_hi = 0.0;
      for (int k = 1; !hit && !lost; ++k) {
        const double t = k * step;
        if (t > cam.max_range()) {
          lost = true;
          break;
        }
        double f = 0.0;
        if (!clearance(t, f)) {
          lost = true;
          break;
        }
        if (f <= 0.0) {
          hit = true;
          t_hi = t;
          f_hi = f;
        } else {
          t_lo = t;
          f_lo = f;
        }
      }

      const double n = normal(rng);
      if (!hit) continue;
      bool ok = true;
      while (t_hi - t_lo > kBisectionTolerance) {
        const double t_mid = 0.5 * (t_lo + t_hi);
        double f_mid = 0.0;
        if (!clearance(t_mid, f_mid)) {
          ok = false;
          break;
        }
        if (f_mid <= 0.0) {
          t_hi = t_mid;
          f_hi = f_mid;
        } else {
          t_lo = t_mid;
          f_lo = f_mid;
        }
      }
      if (!ok) continue;
      // Secant step inside the final bracket.
      double dist = f_lo - f_hi > 0.0 ? t_lo + (t_hi - t_lo) * f_lo / (f_lo - f_hi) : t_hi;
      if (noise.relative_sigma > 0.0) {
        dist *= std::max(1.0 + noise.relative_sigma * n, 1e-3);
      }
      const std::size_t k = frame.index(r, c);
      frame.distance[k] = dist;
      frame.valid[k] = 1;
    }
  }
  return frame;
}

std::vector<Eigen::Vector3d> render_level_cloud(const DepthFrame& frame,
                                                const CameraModel& cam, double roll,
                                                double pitch) {
  const Eigen::Matrix3d level = body_to_level(roll, pitch);
  std::vector<Eigen::Vector3d> points;
  points.reserve(frame.distance.size());
  for (int r = 0; r < frame.rows; ++r) {
    for (int c = 0; c < frame.cols; ++c) {
      if (!frame.is_valid(r, c)) continue;
      points.push_back(level * (cam.body_origin() + frame.at(r, c) * cam.body_ray(r, c)));
    }
  }
  return points;
}

std::vector<Eigen::Vector3d> render_pointcloud(const DepthFrame& frame,
                                               const CameraModel& cam,
                                               const RoverPose& pose) {
  std::vector<Eigen::Vector3d> points = render_level_cloud(frame, cam, pose.roll, pose.pitch);
  const Eigen::Matrix3d yaw =
      Eigen::AngleAxisd(pose.heading, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d base(pose.x, pose.y, pose.z);
  for (auto& p : points) p = base + yaw * p;
  return points;
}

}  // namespace rover_gnc
