#pragma once

#include <deque>
#include <optional>
#include <string>

namespace rover_gnc {

enum class NavMode { kEfficient, kFull };
enum class ModePolicy { kEfficientOnly, kFullOnly, kAuto };

std::string to_string(NavMode mode);
std::string to_string(ModePolicy policy);
/// Accepts "efficient", "full", "auto" (and the *_only spellings).
ModePolicy parse_mode_policy(const std::string& text);

struct ModeThresholds {
  /// Efficient -> Full when more replans than this happened over the last
  /// `window` meters.
  double replans_up = 5.0;
  double window = 100.0;
  /// Efficient -> Full when hazard density (hazards per 100 m^2) exceeds this.
  double hazard_density_up = 1e9;
  /// Full -> Efficient after this much hazard-free travel.
  double hazard_free_down = 50.0;
};

/// Pure decision for one step. `hazard_free_distance` is the distance
/// travelled since the last hazard (or since entering Full).
NavMode select_mode(ModePolicy policy, NavMode current, double recent_replans,
                    double hazard_density, double hazard_free_distance,
                    const ModeThresholds& thresholds = {});

/// Stateful wrapper fed with odometer readings and events.
class ModeSelector {
 public:
  explicit ModeSelector(ModePolicy policy, ModeThresholds thresholds = {});

  NavMode mode() const { return mode_; }
  ModePolicy policy() const { return policy_; }

  void record_replan(double odometer);
  void record_hazard(double odometer);

  /// Replans inside the trailing window ending at `odometer`.
  int recent_replans(double odometer) const;

  /// Re-evaluates the mode; returns a human-readable cause on a switch.
  std::optional<std::string> update(double odometer, double hazard_density = 0.0);

 private:
  ModePolicy policy_;
  ModeThresholds thresholds_;
  NavMode mode_;
  std::deque<double> replans_;
  double last_hazard_or_switch_ = 0.0;
};

}  // namespace rover_gnc
