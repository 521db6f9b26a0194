#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace rover_gnc {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

struct GridIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Regular 2D lattice shared by every grid in the stack.
///
/// Cell (0,0) is centered on `origin`; columns grow along +x (east), rows
/// along +y (north). Storage is row-major.
struct GridGeometry {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double resolution = 1.0;
  int rows = 1;
  int cols = 1;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t flat(int row, int col) const {
    return static_cast<std::size_t>(row) * cols + col;
  }
  std::size_t flat(GridIndex idx) const { return flat(idx.row, idx.col); }

  bool contains(int row, int col) const {
    return row >= 0 && row < rows && col >= 0 && col < cols;
  }
  bool contains(GridIndex idx) const { return contains(idx.row, idx.col); }

  Eigen::Vector2d world_of(GridIndex idx) const {
    return origin + resolution * Eigen::Vector2d(idx.col, idx.row);
  }

  /// Index of the cell containing `p`, unchecked (may be out of range).
  GridIndex nearest(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d f = (p - origin) / resolution;
    return {static_cast<int>(std::floor(f.y() + 0.5)),
            static_cast<int>(std::floor(f.x() + 0.5))};
  }

  /// Index of the cell containing `p`, or nullopt outside the grid.
  std::optional<GridIndex> grid_of(const Eigen::Vector2d& p) const {
    const GridIndex idx = nearest(p);
    if (!contains(idx)) return std::nullopt;
    return idx;
  }

  /// True when `p` lies inside the hull of cell centers (interpolable).
  bool in_center_hull(const Eigen::Vector2d& p, double slack = 1e-9) const;

  Eigen::Vector2d max_center() const {
    return origin + resolution * Eigen::Vector2d(cols - 1, rows - 1);
  }

  friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
    return a.origin == b.origin && a.resolution == b.resolution && a.rows == b.rows &&
           a.cols == b.cols;
  }
};

/// Polyline with cumulative arc length, used for global and repaired paths.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Eigen::Vector2d> points);

  const std::vector<Eigen::Vector2d>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double arclength_at(std::size_t i) const { return cumulative_[i]; }

  /// Point at arc length `s`, clamped to [0, length].
  Eigen::Vector2d point_at(double s) const;

  /// Index of the segment containing arc length `s`.
  std::size_t segment_at(double s) const;

  struct Projection {
    double arclength = 0.0;
    double distance = 0.0;
    Eigen::Vector2d point = Eigen::Vector2d::Zero();
  };

  /// Closest point to `p` restricted to arc lengths in [s_min, s_max].
  Projection project(const Eigen::Vector2d& p, double s_min = 0.0,
                     double s_max = std::numeric_limits<double>::infinity()) const;

 private:
  std::vector<Eigen::Vector2d> points_;
  std::vector<double> cumulative_;
};

/// Stateless SplitMix64 step; used to derive independent per-step seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace rover_gnc
