#pragma once

#include "rover_gnc/terrain.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace rover_gnc {

/// Planar pose plus terrain-derived attitude. `z` is the height of the
/// ground contact point under the rover origin.
struct RoverPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // (-pi, pi]
  double roll = 0.0;     // > 0: left side up
  double pitch = 0.0;    // > 0: nose up
  double z = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
};

/// Body-to-world rotation (heading, then nose-up pitch, then roll).
Eigen::Matrix3d body_to_world(const RoverPose& pose);

/// Rotation removing roll and pitch only: body frame -> gravity-aligned
/// heading frame.
Eigen::Matrix3d body_to_level(double roll, double pitch);

/// Baseline between the wheel contacts used to derive attitude from the DEM.
inline constexpr double kAttitudeBaseline = 0.5;

/// Recomputes roll/pitch/z from the terrain under (x, y, heading).
RoverPose settle_on_terrain(RoverPose pose, const ElevationGrid& truth);

struct ControlCommand {
  double speed = 0.0;      // m/s
  double turn_rate = 0.0;  // rad/s
};

/// Closed-form unicycle step; throws OutOfBoundsError if the rover leaves
/// the terrain.
RoverPose step_kinematics(const RoverPose& pose, const ControlCommand& cmd, double dt,
                          const ElevationGrid& truth);

/// Relative motion in the chord convention: the rover translates `forward`
/// along heading + heading_change/2 (and `lateral` to its left), then turns.
struct OdometryDelta {
  double forward = 0.0;
  double heading_change = 0.0;
  double lateral = 0.0;
  double vertical = 0.0;
  double drift_rate = 0.0;
};

/// Applies a delta to a pose (planar part and z only).
RoverPose compose(const RoverPose& pose, const OdometryDelta& delta);

/// Delta that takes `from` to `to`.
OdometryDelta delta_between(const RoverPose& from, const RoverPose& to);

/// Traverse length at which the expected final position error of the
/// odometry model equals drift_rate * distance.
inline constexpr double kDriftReferenceDistance = 100.0;

/// Visual-odometry stand-in: zero-mean noise on forward distance and heading
/// change, scaled with sqrt(step length). Heading noise dominates, so the
/// accumulated error is mostly lateral. drift_rate must be in [0, 0.1].
OdometryDelta simulate_odometry(const OdometryDelta& true_delta, std::uint64_t seed,
                                double drift_rate);

/// Footprint-based description of a pinhole region of interest.
struct CameraGeometry {
  double height = 1.0;                  // h_cam above ground, meters
  double pitch_down = deg2rad(30.0);    // radians
  Eigen::Vector2d mount{0.6, 0.0};      // rover-frame xy of the camera
  int rows = 32;
  int cols = 64;
  double near = 0.9;   // rover-frame x of the bottom RoI row on flat ground
  double far = 1.9;    // rover-frame x of the top RoI row on flat ground
  double width = 1.2;  // flat-ground footprint width at mid range
  double max_range = 20.0;
};

/// Pinhole RoI with per-pixel unit rays in the camera frame
/// (x optical axis, y left, z up before the pitch-down rotation).
class CameraModel {
 public:
  CameraModel() = default;
  /// Throws ConfigError for non-physical geometry.
  explicit CameraModel(const CameraGeometry& geometry);

  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }
  double height() const { return geometry_.height; }
  double pitch_down() const { return geometry_.pitch_down; }
  double max_range() const { return geometry_.max_range; }
  const CameraGeometry& geometry() const { return geometry_; }

  const Eigen::Vector3d& ray(int row, int col) const {
    return rays_[static_cast<std::size_t>(row) * geometry_.cols + col];
  }
  /// Ray in the rover body frame.
  Eigen::Vector3d body_ray(int row, int col) const { return camera_to_body_ * ray(row, col); }
  /// Camera center in the rover body frame.
  Eigen::Vector3d body_origin() const {
    return {geometry_.mount.x(), geometry_.mount.y(), geometry_.height};
  }

  /// Flat-ground intersection of a pixel ray in rover-frame xy.
  Eigen::Vector2d flat_ground_point(int row, int col) const;
  /// Closed-form flat-ground distance h_cam / cos(alpha) for a level rover.
  double flat_ground_distance(int row, int col) const;

  /// The four RoI corners as (pixel col,row) -> rover-frame xy on flat ground.
  std::array<std::pair<Eigen::Vector2d, Eigen::Vector2d>, 4> corner_pairs() const;

 private:
  CameraGeometry geometry_;
  Eigen::Matrix3d camera_to_body_ = Eigen::Matrix3d::Identity();
  std::vector<Eigen::Vector3d> rays_;
};

struct DepthFrame {
  int rows = 0;
  int cols = 0;
  std::vector<double> distance;
  std::vector<std::uint8_t> valid;

  DepthFrame() = default;
  DepthFrame(int r, int c) : rows(r), cols(c), distance(std::size_t(r) * c, 0.0), valid(std::size_t(r) * c, 0) {}
  std::size_t index(int row, int col) const { return std::size_t(row) * cols + col; }
  double at(int row, int col) const { return distance[index(row, col)]; }
  bool is_valid(int row, int col) const { return valid[index(row, col)] != 0; }
};

struct DepthNoise {
  double relative_sigma = 0.0;  // sigma / distance
  std::uint64_t seed = 0;
};

/// Ray-marched depth (step = terrain resolution / 2, bisection to 1 mm).
/// Rays leaving the terrain or exceeding max_range are invalid. Throws
/// GeometryFault when the camera is not above the terrain.
DepthFrame render_depth(const RoverPose& pose, const CameraModel& cam,
                        const ElevationGrid& truth, const DepthNoise& noise = {});

/// Valid pixels unprojected into the gravity-aligned rover frame: origin at
/// the ground contact point, x along heading, z up.
std::vector<Eigen::Vector3d> render_level_cloud(const DepthFrame& frame,
                                                const CameraModel& cam, double roll,
                                                double pitch);

/// Valid pixels unprojected into world coordinates.
std::vector<Eigen::Vector3d> render_pointcloud(const DepthFrame& frame,
                                               const CameraModel& cam,
                                               const RoverPose& pose);

}  // namespace rover_gnc
