#pragma once

#include "rover_gnc/geometry.hpp"
#include "rover_gnc/hazard_detector.hpp"
#include "rover_gnc/rover_sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace rover_gnc {

/// Ground-planned waypoint sequence followed inside a safety corridor.
struct GlobalPath {
  Polyline path;
  double corridor_half_width = 1.5;
};

/// Validates >= 2 waypoints and distinct consecutive waypoints.
GlobalPath make_global_path(std::vector<Eigen::Vector2d> waypoints, double corridor_half_width);

/// Plain text, one "x y" pair per line; '#' starts a comment.
GlobalPath load_global_path(std::istream& in, double corridor_half_width);
GlobalPath load_global_path(const std::filesystem::path& path, double corridor_half_width);
void save_global_path(std::ostream& out, const GlobalPath& path);

struct RepairedPath {
  std::vector<Eigen::Vector2d> waypoints;
  /// Global waypoint index of the segment on which the detour merges back.
  std::size_t rejoin_index = 0;
  /// Arc length along the global path of the merge point.
  double rejoin_arclength = 0.0;
};

struct RepairOptions {
  double max_rejoin_dist = 10.0;  // along-path search window, meters
  /// Free global-path length required on each side of a rejoin point.
  double rejoin_clearance = 1.0;
  /// Lower bound on the pose projection (progress already made).
  double from_arclength = 0.0;
};

/// Detour from the pose to the earliest reachable rejoin point beyond the
/// first blocked stretch of the global path (8-connected Dijkstra, diagonal
/// cost sqrt(2)), smoothed by greedy line-of-sight shortcutting. With no
/// blocked stretch the detour is a straight return to the path. Throws
/// PathBlockedError when no rejoin point is reachable inside the window and
/// ContractError when the pose cell is a hazard.
RepairedPath repair(const RoverPose& pose, const GlobalPath& global,
                    const TraversabilityGrid& trav, const RepairOptions& options = {});

/// True iff every segment, sampled at resolution / 2, stays in free cells.
bool validate(const RepairedPath& path, const TraversabilityGrid& trav);
bool segment_is_free(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const TraversabilityGrid& trav);

/// Repaired detour followed by the remainder of the global path.
Polyline splice(const RepairedPath& repaired, const GlobalPath& global);

/// First arc length in [from, to] at which the path enters a hazard cell.
std::optional<double> first_blocked_arclength(const Polyline& path, const TraversabilityGrid& trav,
                                              double from, double to);

}  // namespace rover_gnc
