#pragma once

#include "rover_gnc/rover_sim.hpp"
#include "rover_gnc/slam.hpp"
#include "rover_gnc/terrain.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rover_gnc {

/// Block mean over valid cells. Blocks are aligned so that output cell
/// centers sit on `lattice_origin` + multiples of `coarse_resolution`
/// (pass the orbital map origin to get cells that coincide with orbital
/// cells). Blocks with fewer than half their cells valid are invalid; a
/// block partially outside the input counts the missing cells as invalid.
/// Throws InsufficientDataError when no block is valid and ConfigError on a
/// non-integer ratio.
ElevationGrid downsample_local(const ElevationGrid& local, double coarse_resolution,
                               const Eigen::Vector2d& lattice_origin);
ElevationGrid downsample_local(const LocalRollingMap& local, double coarse_resolution,
                               const Eigen::Vector2d& lattice_origin);

/// Central-difference gradient magnitude; one-sided at the border. A cell
/// is invalid when any height it uses is invalid. Needs at least 3x3.
ElevationGrid gradient_magnitude(const ElevationGrid& grid);

enum class CorrelationMode {
  kRaw,         // sum of products over contributing pixels, divided by their count
  kNormalized,  // zero-mean normalized cross-correlation over contributing pixels
};

std::string to_string(CorrelationMode mode);
CorrelationMode parse_correlation_mode(const std::string& text);

struct MatchParams {
  CorrelationMode mode = CorrelationMode::kRaw;
  double min_sharpness = 1.2;
  double min_valid_fraction = 0.6;
};

struct MatchResult {
  int rows = 0;  // offsets along orbital rows
  int cols = 0;
  std::vector<double> scores;  // row-major R
  int best_row = 0;
  int best_col = 0;
  double peak = 0.0;
  double sharpness = 1.0;
  double valid_fraction = 0.0;  // contributing L pixels at the peak / L size
  bool accepted = false;

  double at(int i, int j) const { return scores[static_cast<std::size_t>(i) * cols + j]; }
};

/// Slides L over O. R(i,j) combines L(i',j') with O(i+i',j+j') over pixels
/// valid in both. The best offset is the first maximum in row-major order.
/// Sharpness compares the peak with the best score more than one cell away.
/// Throws ContractError when L does not fit inside O.
MatchResult cross_correlate(const ElevationGrid& L, const ElevationGrid& O,
                            const MatchParams& params = {});

struct Correction {
  RoverPose pose;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();  // applied (or rejected) shift
  bool applied = false;
  bool gated = false;
  std::string diagnostic;
};

/// Moves the estimate so that the local map cell (0,0), located at
/// `local_anchor` in the estimate frame, lands on the matched orbital cell.
/// Not-accepted matches and shifts longer than `gate` leave the pose as is.
Correction apply_correction(const MatchResult& match, const RoverPose& estimate,
                            const ElevationGrid& orbital, const Eigen::Vector2d& local_anchor,
                            double gate = 10.0);

struct GlobalCorrectionParams {
  MatchParams match;
  double gate = 10.0;
  double min_relief_variance = 0.05;  // m^2 over the local window
};

struct GlobalCorrectionOutcome {
  bool triggered = false;  // relief high enough to attempt a match
  double relief_variance = 0.0;
  std::optional<MatchResult> match;
  Correction correction;
};

/// Full chain: relief check, downsample, gradients, correlation, correction.
GlobalCorrectionOutcome run_global_correction(const LocalRollingMap& map,
                                              const ElevationGrid& orbital,
                                              const RoverPose& estimate,
                                              const GlobalCorrectionParams& params);

/// Smallest sub-grid containing every valid cell (nullopt if none).
std::optional<ElevationGrid> crop_to_valid(const ElevationGrid& grid);

/// Full R matrix as CSV, one line per offset row.
void write_match_csv(std::ostream& out, const MatchResult& match);
void write_match_csv(const std::filesystem::path& path, const MatchResult& match);
/// One-line summary: offset, score, sharpness, accepted.
std::string match_summary(const MatchResult& match);

}  // namespace rover_gnc
