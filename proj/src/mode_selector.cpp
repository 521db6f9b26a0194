#include "rover_gnc/mode_selector.hpp"

#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <sstream>

namespace rover_gnc {

std::string to_string(NavMode mode) { return mode == NavMode::kFull ? "full" : "efficient"; }

std::string to_string(ModePolicy policy) {
  switch (policy) {
    case ModePolicy::kEfficientOnly:
      return "efficient";
    case ModePolicy::kFullOnly:
      return "full";
    case ModePolicy::kAuto:
      return "auto";
  }
  return "auto";
}

ModePolicy parse_mode_policy(const std::string& text) {
  if (text == "efficient" || text == "efficient_only") return ModePolicy::kEfficientOnly;
  if (text == "full" || text == "full_only") return ModePolicy::kFullOnly;
  if (text == "auto") return ModePolicy::kAuto;
  throw ConfigError("unknown mode policy '" + text + "' (expected efficient, full or auto)");
}

NavMode select_mode(ModePolicy policy, NavMode current, double recent_replans,
                    double hazard_density, double hazard_free_distance,
                    const ModeThresholds& thresholds) {
  switch (policy) {
    case ModePolicy::kEfficientOnly:
      return NavMode::kEfficient;
    case ModePolicy::kFullOnly:
      return NavMode::kFull;
    case ModePolicy::kAuto:
      break;
  }
  if (current == NavMode::kEfficient) {
    if (recent_replans > thresholds.replans_up || hazard_density > thresholds.hazard_density_up) {
      return NavMode::kFull;
    }
    return NavMode::kEfficient;
  }
  return hazard_free_distance >= thresholds.hazard_free_down ? NavMode::kEfficient
                                                             : NavMode::kFull;
}

ModeSelector::ModeSelector(ModePolicy policy, ModeThresholds thresholds)
    : policy_(policy),
      thresholds_(thresholds),
      mode_(policy == ModePolicy::kFullOnly ? NavMode::kFull : NavMode::kEfficient) {}

void ModeSelector::record_replan(double odometer) { replans_.push_back(odometer); }

void ModeSelector::record_hazard(double odometer) { last_hazard_or_switch_ = odometer; }

int ModeSelector::recent_replans(double odometer) const {
  return static_cast<int>(std::count_if(replans_.begin(), replans_.end(), [&](double d) {
    return d > odometer - thresholds_.window && d <= odometer;
  }));
}

std::optional<std::string> ModeSelector::update(double odometer, double hazard_density) {
  while (!replans_.empty() && replans_.front() <= odometer - thresholds_.window) {
    replans_.pop_front();
  }
  const int recent = recent_replans(odometer);
  const double hazard_free = odometer - last_hazard_or_switch_;
  const NavMode next =
      select_mode(policy_, mode_, recent, hazard_density, hazard_free, thresholds_);
  if (next == mode_) return std::nullopt;
  std::ostringstream cause;
  if (next == NavMode::kFull) {
    cause << recent << " replans in the last " << thresholds_.window << " m";
    if (hazard_density > thresholds_.hazard_density_up) {
      cause << ", hazard density " << hazard_density << " per 100 m^2";
    }
  } else {
    cause << hazard_free << " m without hazards";
  }
  mode_ = next;
  last_hazard_or_switch_ = odometer;
  // Old replans already caused one escalation; forget them to avoid flapping.
  if (next == NavMode::kEfficient) replans_.clear();
  return cause.str();
}

}  // namespace rover_gnc
