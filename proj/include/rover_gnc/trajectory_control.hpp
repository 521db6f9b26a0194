#pragma once

#include "rover_gnc/geometry.hpp"
#include "rover_gnc/rover_sim.hpp"

#include <string>

namespace rover_gnc {

struct ControlParams {
  double lookahead = 1.0;  // meters
  double v_max = 0.3;      // m/s
  double w_max = 0.5;      // rad/s
  double goal_tolerance = 0.3;
  /// Speed is divided by (1 + curvature_gain * |curvature|).
  double curvature_gain = 1.0;
};

/// Pure pursuit toward the point `lookahead` meters ahead of the closest
/// path point. `progress` (arc length) keeps the closest-point search
/// monotone when given and is updated in place.
ControlCommand control_step(const RoverPose& pose, const Polyline& path,
                            const ControlParams& params, double* progress = nullptr);

/// Clamps a command into the |v| <= v_max, |w| <= w_max box.
ControlCommand saturate(ControlCommand cmd, const ControlParams& params);

enum class FaultLatch { kNominal, kSlip, kAttitude, kCorridor, kMotor };

std::string to_string(FaultLatch latch);

struct FdirLimits {
  double slip_limit = 0.4;
  double roll_limit = deg2rad(20.0);
  double pitch_limit = deg2rad(20.0);
  double corridor = 1.5;  // max deviation from the active path, meters
  /// Motor current proxy: |speed| * |tan(pitch)| above this is a motor fault.
  double motor_limit = 0.15;
  double slip_epsilon = 1e-3;
};

struct FdirState {
  double slip_ratio = 0.0;
  bool roll_exceeded = false;
  bool pitch_exceeded = false;
  double corridor_deviation = 0.0;
  FaultLatch latch = FaultLatch::kNominal;
};

/// Stateless evaluation of the monitors; the first failing check (slip,
/// attitude, corridor, motor) names the fault.
FdirState fdir_check(const OdometryDelta& estimated, const OdometryDelta& commanded,
                     const RoverPose& pose, double corridor_deviation,
                     const FdirLimits& limits, double commanded_speed = 0.0);

/// Latching wrapper: once a fault is raised it stays until reset().
class FdirMonitor {
 public:
  explicit FdirMonitor(FdirLimits limits = {}) : limits_(limits) {}

  const FdirState& update(const OdometryDelta& estimated, const OdometryDelta& commanded,
                          const RoverPose& pose, double corridor_deviation,
                          double commanded_speed = 0.0);
  const FdirState& state() const { return state_; }
  bool faulted() const { return state_.latch != FaultLatch::kNominal; }
  void reset() { state_ = FdirState{}; }

  /// Zero command while a fault is latched.
  ControlCommand gate(const ControlCommand& cmd) const {
    return faulted() ? ControlCommand{} : cmd;
  }

 private:
  FdirLimits limits_;
  FdirState state_;
};

}  // namespace rover_gnc
