#pragma once

#include "rover_gnc/geometry.hpp"
#include "rover_gnc/rover_sim.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace rover_gnc {

/// One pixel <-> rover-frame ground correspondence. Pixel coords are
/// (col, row).
using CornerPair = std::pair<Eigen::Vector2d, Eigen::Vector2d>;

/// Per-pixel threshold distances recorded on flat ground.
struct CalibrationTable {
  int rows = 0;
  int cols = 0;
  double h_cam = 0.0;
  double t_near = 0.0;  // tolerated rock height
  double t_far = 0.0;   // tolerated pit depth
  std::vector<double> d_cal;
  std::vector<double> d_min;
  std::vector<double> d_max;
  std::array<CornerPair, 4> corners{};

  std::size_t index(int row, int col) const { return std::size_t(row) * cols + col; }
};

/// Nearest tolerated distance along a pixel ray: a surface this close is at
/// least t_near above the calibration plane.
inline double min_tolerated_distance(double d_cal, double h_cam, double t_near) {
  return d_cal * (h_cam - t_near) / h_cam;
}

/// Farthest tolerated distance: the same similar-triangles argument below
/// the ground plane for pits of depth t_far.
inline double max_tolerated_distance(double d_cal, double h_cam, double t_far) {
  return d_cal * (h_cam + t_far) / h_cam;
}

/// Throws CalibrationError on any invalid pixel, ConfigError when
/// t_near >= h_cam or a tolerance is negative.
CalibrationTable calibrate(const DepthFrame& flat_frame, double h_cam, double t_near,
                           double t_far, const std::array<CornerPair, 4>& corners);

void save_calibration(std::ostream& out, const CalibrationTable& table);
void save_calibration(const std::filesystem::path& path, const CalibrationTable& table);
CalibrationTable load_calibration(std::istream& in);
CalibrationTable load_calibration(const std::filesystem::path& path);

enum class PixelClass : std::uint8_t { kFree = 0, kPositive = 1, kNegative = 2, kInvalid = 3 };

struct HazardMask {
  int rows = 0;
  int cols = 0;
  std::vector<PixelClass> cells;

  PixelClass at(int row, int col) const { return cells[std::size_t(row) * cols + col]; }
  std::size_t count(PixelClass cls) const;
  bool any_hazard() const {
    return count(PixelClass::kPositive) + count(PixelClass::kNegative) > 0;
  }
};

inline constexpr int kDefaultMinCluster = 4;

/// Threshold comparison followed by removal of 8-connected hazard clusters
/// smaller than `min_cluster` pixels. Throws ContractError on shape mismatch.
HazardMask detect(const DepthFrame& frame, const CalibrationTable& table,
                  int min_cluster = kDefaultMinCluster);

/// Homography from pixel (col, row) to rover-frame ground xy.
class PerspectiveTransform {
 public:
  PerspectiveTransform() = default;
  explicit PerspectiveTransform(const Eigen::Matrix3d& h) : h_(h) {}

  const Eigen::Matrix3d& matrix() const { return h_; }
  Eigen::Vector2d apply(const Eigen::Vector2d& pixel) const;
  PerspectiveTransform inverse() const { return PerspectiveTransform(h_.inverse()); }

 private:
  Eigen::Matrix3d h_ = Eigen::Matrix3d::Identity();
};

/// Exact homography through four pairs (h33 = 1). Throws
/// SingularGeometryError when three points of either side are collinear.
PerspectiveTransform fit_perspective(const std::array<CornerPair, 4>& pairs);

enum class GridFrame { kRover, kWorld };

/// Binary occupancy: 0 traversable, 1 hazard. Cells outside the grid are
/// unknown and reported traversable.
class TraversabilityGrid {
 public:
  TraversabilityGrid() = default;
  TraversabilityGrid(const GridGeometry& geometry, GridFrame frame);

  const GridGeometry& geometry() const { return geometry_; }
  GridFrame frame() const { return frame_; }

  bool is_hazard(int row, int col) const { return cells_[geometry_.flat(row, col)] != 0; }
  bool is_hazard(const Eigen::Vector2d& p) const {
    const auto idx = geometry_.grid_of(p);
    return idx && is_hazard(idx->row, idx->col);
  }
  void set(int row, int col, bool hazard) { cells_[geometry_.flat(row, col)] = hazard ? 1 : 0; }
  std::size_t hazard_count() const;

  /// Ors another lattice-aligned grid into this one (cells outside dropped).
  void merge(const TraversabilityGrid& other);
  /// Clears hazard cells within `radius` of `p`.
  void clear_disc(const Eigen::Vector2d& p, double radius);
  /// Dilates hazards with a disc of ceil(margin / resolution) cells.
  void dilate(double margin);

 private:
  GridGeometry geometry_;
  GridFrame frame_ = GridFrame::kWorld;
  std::vector<std::uint8_t> cells_;
};

/// Hazard pixels -> rover frame (homography) -> world frame (pose, when
/// given) -> rasterized on a lattice aligned to multiples of `resolution` ->
/// dilated by the safety margin. An all-free mask yields an all-zero grid.
TraversabilityGrid project_hazards(const HazardMask& mask, const PerspectiveTransform& tf,
                                   const std::optional<RoverPose>& pose, double safety_margin,
                                   double resolution);

}  // namespace rover_gnc
