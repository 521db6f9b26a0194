#pragma once

#include "rover_gnc/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace rover_gnc {

/// Grid of heights in meters with a per-cell validity flag.
///
/// Used for the ground-truth DEM, the orbital map and the SLAM map payload.
/// Unknown cells are flagged invalid; their stored height is meaningless.
class ElevationGrid {
 public:
  ElevationGrid() = default;
  /// Throws ConfigError when resolution <= 0 or rows/cols < 1.
  ElevationGrid(const GridGeometry& geometry, double fill = 0.0, bool valid = true);

  const GridGeometry& geometry() const { return geometry_; }
  const Eigen::Vector2d& origin() const { return geometry_.origin; }
  double resolution() const { return geometry_.resolution; }
  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }

  double height(int row, int col) const { return heights_[geometry_.flat(row, col)]; }
  bool is_valid(int row, int col) const { return valid_[geometry_.flat(row, col)] != 0; }
  void set_height(int row, int col, double h) {
    const std::size_t k = geometry_.flat(row, col);
    heights_[k] = h;
    valid_[k] = 1;
  }
  void invalidate(int row, int col) { valid_[geometry_.flat(row, col)] = 0; }

  std::span<const double> heights() const { return heights_; }
  std::span<const std::uint8_t> validity() const { return valid_; }

  Eigen::Vector2d world_of(GridIndex idx) const { return geometry_.world_of(idx); }
  std::optional<GridIndex> grid_of(const Eigen::Vector2d& p) const {
    return geometry_.grid_of(p);
  }

  std::size_t valid_count() const;
  double mean_valid_height() const;

  /// Bilinear height at `p`, or nullopt if outside the center hull or any
  /// contributing cell is unknown.
  std::optional<double> try_height_at(const Eigen::Vector2d& p) const;

  friend bool operator==(const ElevationGrid&, const ElevationGrid&) = default;

 private:
  GridGeometry geometry_;
  std::vector<double> heights_;
  std::vector<std::uint8_t> valid_;
};

struct TerrainSpec {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // center of cell (0,0)
  double width = 40.0;                                // extent along x, meters
  double length = 40.0;                               // extent along y, meters
  double resolution = 0.1;
  double amplitude = 0.3;  // max |height| in meters
  double base_wavelength = 8.0;
  int octaves = 4;
  double persistence = 0.5;
  int craters = 0;
  int ripples = 0;
};

struct ObstacleSpec {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.3;
  double height = 0.3;  // > 0 rock, < 0 pit
};

/// Deterministic synthetic terrain: multi-octave value noise plus optional
/// craters and ripple fields, rescaled so that max |height| == amplitude.
ElevationGrid generate_terrain(std::uint64_t seed, const TerrainSpec& spec);

/// Adds cosine-tapered discs. Overlapping rocks combine by max, overlapping
/// pits by min; cells outside every footprint are untouched.
ElevationGrid place_obstacles(const ElevationGrid& grid,
                              const std::vector<ObstacleSpec>& obstacles);

/// Height contribution of one obstacle at distance `r` from its center.
double obstacle_profile(const ObstacleSpec& obstacle, double r);

/// Block-mean downsampling of the truth DEM to an integer-multiple resolution.
ElevationGrid derive_orbital_map(const ElevationGrid& truth, double orbital_resolution);

/// Bilinear height; throws OutOfBoundsError / UnknownCellError.
double sample_height(const ElevationGrid& grid, const Eigen::Vector2d& p);

/// Central-difference gradient (dz/dx, dz/dy) of the bilinear surface with
/// the given step, falling back to one-sided differences at the boundary.
Eigen::Vector2d terrain_gradient(const ElevationGrid& grid, const Eigen::Vector2d& p,
                                 double step);

/// Integer ratio between two resolutions, or ConfigError.
int resolution_ratio(double coarse, double fine);

}  // namespace rover_gnc
