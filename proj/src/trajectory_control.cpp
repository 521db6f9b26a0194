#include "rover_gnc/trajectory_control.hpp"

#include <algorithm>
#include <cmath>

namespace rover_gnc {

ControlCommand saturate(ControlCommand cmd, const ControlParams& params) {
  cmd.speed = std::clamp(cmd.speed, -params.v_max, params.v_max);
  cmd.turn_rate = std::clamp(cmd.turn_rate, -params.w_max, params.w_max);
  return cmd;
}

ControlCommand control_step(const RoverPose& pose, const Polyline& path,
                            const ControlParams& params, double* progress) {
  if (path.empty()) return {};
  const Eigen::Vector2d p = pose.position();
  const Eigen::Vector2d goal = path.points().back();

  // Search a bounded window ahead of the last progress so a path that
  // doubles back does not make the follower skip ahead.
  const double s_min = progress ? *progress : 0.0;
  const double s_max = progress ? s_min + 2.0 * params.lookahead + 2.0
                                : std::numeric_limits<double>::infinity();
  const auto proj = path.project(p, s_min, s_max);
  if (progress) *progress = proj.arclength;

  const double remaining = path.length() - proj.arclength;
  if ((goal - p).norm() <= params.goal_tolerance && remaining <= params.goal_tolerance + 1e-9) {
    return {};
  }

  Eigen::Vector2d target = path.point_at(proj.arclength + params.lookahead);
  if ((target - p).norm() < 1e-9) target = goal;
  const Eigen::Vector2d d = target - p;
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  const double dist2 = lx * lx + ly * ly;
  if (dist2 < 1e-12) return {};
  const double curvature = 2.0 * ly / dist2;

  double speed = params.v_max / (1.0 + params.curvature_gain * std::abs(curvature));
  // Target behind the rover: turn in place toward it.
  if (lx < 0.0) speed = 0.0;
  double turn = speed * curvature;
  if (speed == 0.0) turn = std::copysign(params.w_max, ly == 0.0 ? 1.0 : ly);
  if (std::abs(turn) > params.w_max) {
    // Keep the pursuit curvature, slow down instead.
    speed = params.w_max / std::abs(curvature);
    turn = std::copysign(params.w_max, turn);
  }
  return saturate({speed, turn}, params);
}

std::string to_string(FaultLatch latch) {
  switch (latch) {
    case FaultLatch::kNominal:
      return "nominal";
    case FaultLatch::kSlip:
      return "slip_fault";
    case FaultLatch::kAttitude:
      return "attitude_fault";
    case FaultLatch::kCorridor:
      return "corridor_fault";
    case FaultLatch::kMotor:
      return "motor_fault";
  }
  return "unknown";
}

FdirState fdir_check(const OdometryDelta& estimated, const OdometryDelta& commanded,
                     const RoverPose& pose, double corridor_deviation,
                     const FdirLimits& limits, double commanded_speed) {
  FdirState st;
  const double cmd_dist = std::abs(commanded.forward);
  const double est_dist = std::hypot(estimated.forward, estimated.lateral);
  st.slip_ratio = std::abs(cmd_dist - est_dist) / std::max(cmd_dist, limits.slip_epsilon);
  st.roll_exceeded = std::abs(pose.roll) > limits.roll_limit;
  st.pitch_exceeded = std::abs(pose.pitch) > limits.pitch_limit;
  st.corridor_deviation = corridor_deviation;
  if (st.slip_ratio > limits.slip_limit) {
    st.latch = FaultLatch::kSlip;
  } else if (st.roll_exceeded || st.pitch_exceeded) {
    st.latch = FaultLatch::kAttitude;
  } else if (corridor_deviation > limits.corridor) {
    st.latch = FaultLatch::kCorridor;
  } else if (std::abs(commanded_speed) * std::abs(std::tan(pose.pitch)) > limits.motor_limit) {
    st.latch = FaultLatch::kMotor;
  }
  return st;
}

const FdirState& FdirMonitor::update(const OdometryDelta& estimated,
                                     const OdometryDelta& commanded, const RoverPose& pose,
                                     double corridor_deviation, double commanded_speed) {
  FdirState fresh =
      fdir_check(estimated, commanded, pose, corridor_deviation, limits_, commanded_speed);
  if (faulted()) fresh.latch = state_.latch;
  state_ = fresh;
  return state_;
}

}  // namespace rover_gnc
