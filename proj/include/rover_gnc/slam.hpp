#pragma once

#include "rover_gnc/geometry.hpp"
#include "rover_gnc/rover_sim.hpp"
#include "rover_gnc/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rover_gnc {

/// Fixed-size elevation map centered on the rover. Each valid cell holds a
/// Gaussian height estimate (mean, variance). The lattice never changes
/// phase: shifting moves whole cells and keeps the sub-cell remainder.
class LocalRollingMap {
 public:
  /// `center` is snapped so that cell centers stay on `lattice_origin` +
  /// integer multiples of `resolution`.
  LocalRollingMap(const Eigen::Vector2d& center, int rows, int cols, double resolution,
                  const Eigen::Vector2d& lattice_origin = Eigen::Vector2d::Zero());

  const GridGeometry& geometry() const { return geometry_; }
  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }
  double resolution() const { return geometry_.resolution; }

  /// World coordinates of the map center (moves by whole cells).
  const Eigen::Vector2d& anchor() const { return anchor_; }
  /// Sub-cell part of the last requested center not yet applied.
  const Eigen::Vector2d& residual() const { return residual_; }

  bool is_valid(int row, int col) const { return valid_[geometry_.flat(row, col)] != 0; }
  double mean(int row, int col) const { return mean_[geometry_.flat(row, col)]; }
  double variance(int row, int col) const { return variance_[geometry_.flat(row, col)]; }
  void set_cell(int row, int col, double mean, double variance);
  void invalidate(int row, int col) { valid_[geometry_.flat(row, col)] = 0; }

  std::size_t valid_count() const;

  /// Height of the valid cell containing `p`.
  std::optional<double> height_at(const Eigen::Vector2d& p) const {
    const auto idx = geometry_.grid_of(p);
    if (!idx || !is_valid(idx->row, idx->col)) return std::nullopt;
    return mean(idx->row, idx->col);
  }

  /// Heights as an ElevationGrid (invalid cells stay invalid).
  ElevationGrid heights() const;
  /// Variances as an ElevationGrid, same layout.
  ElevationGrid variances() const;

  /// Variance of valid heights (relief measure).
  double relief_variance() const;

  /// Moves every stored cell by `offset` in world coordinates without
  /// touching contents (used after an absolute correction).
  void translate_frame(const Eigen::Vector2d& offset);

  /// Whole-cell translation towards `new_center`; vacated cells become
  /// invalid and data leaving the window is dropped.
  void shift_to(const Eigen::Vector2d& new_center);

 private:
  GridGeometry geometry_;
  Eigen::Vector2d anchor_;
  Eigen::Vector2d residual_ = Eigen::Vector2d::Zero();
  std::vector<double> mean_;
  std::vector<double> variance_;
  std::vector<std::uint8_t> valid_;
};

/// Scalar Kalman fusion of (mean, var) with an observation (obs, obs_var).
struct GaussianCell {
  double mean = 0.0;
  double variance = 0.0;
};
GaussianCell fuse_gaussian(const GaussianCell& prior, const GaussianCell& observation);

/// Bins world points per cell (mean z, variance sigma_z^2 / count) and
/// fuses each bin into the map. Points outside the window are dropped.
/// Returns the number of updated cells.
std::size_t fuse_observation(LocalRollingMap& map, std::span<const Eigen::Vector3d> cloud,
                             double sigma_z);

/// Exports heights and the sibling variance grid as ESRI ASCII files.
void export_map(const LocalRollingMap& map, const std::filesystem::path& heights_path,
                const std::filesystem::path& variance_path);

struct Particle {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double weight = 0.0;
  double score = 0.0;  // last scan-matching score
};

struct ParticleSet {
  std::vector<Particle> particles;
  double ess = 0.0;
  double resample_threshold = 0.5;  // fraction of N

  std::size_t size() const { return particles.size(); }
};

ParticleSet init_particles(const RoverPose& initial_pose, std::size_t n, double sigma_xy,
                           double sigma_heading, std::uint64_t seed,
                           double resample_threshold = 0.5);

/// Per-update motion noise injected into every particle.
struct MotionNoise {
  double sigma_forward = 0.0;
  double sigma_lateral = 0.0;
  double sigma_heading = 0.0;
};

void predict(ParticleSet& set, const OdometryDelta& odometry, const MotionNoise& noise,
             std::uint64_t seed);

/// Score returned when no cloud point lands on a valid map cell.
inline constexpr double kVetoScore = std::numeric_limits<double>::min();

struct ScanMatchParams {
  double sigma_z = 0.05;
  /// Estimated altitude of the rover ground point; cloud z is relative to it.
  double altitude = 0.0;
};

/// exp(-SSE / (2 sigma_z^2 m)) over the m cloud points (gravity-aligned
/// rover frame) that land on valid cells at the particle pose.
double score_scan(const Particle& particle, std::span<const Eigen::Vector3d> cloud,
                  const LocalRollingMap& map, const ScanMatchParams& params);

/// Logarithm of the same score, without the sentinel clamp: -inf when no
/// point lands on a valid cell. Small sigmas underflow exp() for every
/// particle, so the filter works on these.
double log_score_scan(const Particle& particle, std::span<const Eigen::Vector3d> cloud,
                      const LocalRollingMap& map, const ScanMatchParams& params);

/// Multiplies weights by scores, renormalizes and runs systematic
/// resampling when ESS < threshold * N. Throws FilterDivergenceError when
/// every score is the veto sentinel.
void update_weights_and_resample(ParticleSet& set, std::span<const double> scores,
                                 std::uint64_t seed);

/// Same update from log scores, normalized by the best particle before
/// exponentiation. Throws FilterDivergenceError when every log score is -inf.
void update_weights_from_log_scores(ParticleSet& set, std::span<const double> log_scores,
                                    std::uint64_t seed);

/// Systematic resampling indices for the given weights and offset u in [0, 1).
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u);

double effective_sample_size(const ParticleSet& set);

/// Weighted mean of the top `top_fraction` particles ranked by weight, then
/// by last score. Heading uses the circular mean.
RoverPose estimate_pose(const ParticleSet& set, double top_fraction);

}  // namespace rover_gnc
