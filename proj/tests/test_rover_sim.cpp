#include "rover_gnc/errors.hpp"
#include "rover_gnc/rover_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rover_gnc;

namespace {

ElevationGrid plane(double sx, double sy, double extent = 20.0, double res = 0.1) {
  GridGeometry g;
  g.resolution = res;
  g.rows = g.cols = static_cast<int>(std::lround(2.0 * extent / res)) + 1;
  g.origin = Eigen::Vector2d(-extent, -extent);
  ElevationGrid grid(g);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const Eigen::Vector2d p = grid.world_of({r, c});
      grid.set_height(r, c, sx * p.x() + sy * p.y());
    }
  }
  return grid;
}

CameraGeometry navcam() {
  CameraGeometry g;
  g.height = 1.5;
  g.pitch_down = deg2rad(35.0);
  g.mount = {0.3, 0.0};
  g.rows = 20;
  g.cols = 40;
  g.near = 1.5;
  g.far = 6.0;
  g.width = 4.0;
  return g;
}

}  // namespace

TEST(Kinematics, ArcMatchesFineEulerIntegration) {
  const ElevationGrid flat = plane(0.0, 0.0);
  const RoverPose start{1.0, -2.0, 0.4};
  const ControlCommand cmd{0.3, 0.25};
  const double dt = 2.0;
  const RoverPose next = step_kinematics(start, cmd, dt, flat);

  // Independent oracle: explicit Euler with 10k substeps.
  double x = start.x, y = start.y, h = start.heading;
  const int n = 10000;
  const double h_step = dt / n;
  for (int k = 0; k < n; ++k) {
    const double hm = h + 0.5 * cmd.turn_rate * h_step;
    x += cmd.speed * h_step * std::cos(hm);
    y += cmd.speed * h_step * std::sin(hm);
    h += cmd.turn_rate * h_step;
  }
  EXPECT_NEAR(next.x, x, 1e-9);
  EXPECT_NEAR(next.y, y, 1e-9);
  EXPECT_NEAR(next.heading, normalize_angle(h), 1e-12);
}

TEST(Kinematics, StraightLineAndSpin) {
  const ElevationGrid flat = plane(0.0, 0.0);
  const RoverPose p = step_kinematics({0.0, 0.0, kPi / 2}, {0.5, 0.0}, 2.0, flat);
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 1.0, 1e-12);

  const RoverPose spin = step_kinematics({3.0, 4.0, 0.0}, {0.0, 0.5}, 1.0, flat);
  EXPECT_DOUBLE_EQ(spin.x, 3.0);
  EXPECT_DOUBLE_EQ(spin.y, 4.0);
  EXPECT_NEAR(spin.heading, 0.5, 1e-12);
}

TEST(Kinematics, LeavingTerrainThrows) {
  const ElevationGrid flat = plane(0.0, 0.0, 2.0);
  EXPECT_THROW(step_kinematics({1.9, 0.0, 0.0}, {0.5, 0.0}, 1.0, flat), OutOfBoundsError);
  EXPECT_THROW(step_kinematics({0.0, 0.0, 0.0}, {0.5, 0.0}, 0.0, flat), ContractError);
}

TEST(Kinematics, AttitudeFollowsPlaneSlope) {
  const double sx = 0.2, sy = -0.1;
  const ElevationGrid tilted = plane(sx, sy);
  for (double heading : {0.0, 0.7, -2.1, kPi}) {
    const RoverPose p = settle_on_terrain({1.0, 2.0, heading}, tilted);
    const Eigen::Vector2d fwd(std::cos(heading), std::sin(heading));
    const Eigen::Vector2d left(-fwd.y(), fwd.x());
    EXPECT_NEAR(p.pitch, std::atan(sx * fwd.x() + sy * fwd.y()), 1e-6);
    EXPECT_NEAR(p.roll, std::atan(sx * left.x() + sy * left.y()), 1e-6);
    EXPECT_NEAR(p.z, sx * 1.0 + sy * 2.0, 1e-9);
  }
}

TEST(Odometry, ComposeInvertsDeltaBetween) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-50.0, 50.0), ang(-kPi, kPi);
  for (int k = 0; k < 1000; ++k) {
    const RoverPose a{pos(rng), pos(rng), ang(rng), 0.0, 0.0, pos(rng)};
    const RoverPose b{pos(rng), pos(rng), ang(rng), 0.0, 0.0, pos(rng)};
    const RoverPose c = compose(a, delta_between(a, b));
    EXPECT_NEAR(c.x, b.x, 1e-9);
    EXPECT_NEAR(c.y, b.y, 1e-9);
    EXPECT_NEAR(normalize_angle(c.heading - b.heading), 0.0, 1e-12);
    EXPECT_NEAR(c.z, b.z, 1e-9);
  }
}

TEST(Odometry, ChordConventionOnArc) {
  const ElevationGrid flat = plane(0.0, 0.0);
  const RoverPose a{0.0, 0.0, 0.3};
  const RoverPose b = step_kinematics(a, {0.4, 0.2}, 1.5, flat);
  const OdometryDelta d = delta_between(a, b);
  // Chord length of an arc of radius R = v / w subtending w * t.
  const double radius = 0.4 / 0.2;
  EXPECT_NEAR(d.forward, 2.0 * radius * std::sin(0.5 * 0.2 * 1.5), 1e-12);
  EXPECT_NEAR(d.lateral, 0.0, 1e-12);
  EXPECT_NEAR(d.heading_change, 0.3, 1e-12);
}

TEST(Odometry, ZeroDriftIsExact) {
  const OdometryDelta truth{0.1, 0.01, 0.002, 0.003};
  const OdometryDelta out = simulate_odometry(truth, 99, 0.0);
  EXPECT_EQ(out.forward, truth.forward);
  EXPECT_EQ(out.heading_change, truth.heading_change);
  EXPECT_EQ(out.lateral, truth.lateral);
  EXPECT_EQ(out.vertical, truth.vertical);
}

TEST(Odometry, DeterministicPerSeed) {
  const OdometryDelta truth{0.1, 0.0};
  const OdometryDelta a = simulate_odometry(truth, 7, 0.02);
  const OdometryDelta b = simulate_odometry(truth, 7, 0.02);
  const OdometryDelta c = simulate_odometry(truth, 8, 0.02);
  EXPECT_EQ(a.forward, b.forward);
  EXPECT_EQ(a.heading_change, b.heading_change);
  EXPECT_NE(a.forward, c.forward);
  EXPECT_DOUBLE_EQ(a.drift_rate, 0.02);
}

TEST(Odometry, DriftRateOutOfRangeThrows) {
  EXPECT_THROW(simulate_odometry({0.1}, 1, -0.01), ContractError);
  EXPECT_THROW(simulate_odometry({0.1}, 1, 0.11), ContractError);
}

TEST(Odometry, MonteCarloMeanErrorMatchesDriftRate) {
  // 100 m straight traverse in 0.1 m steps at 2% drift: mean final error ~2 m.
  const int seeds = 500;
  const int steps = 1000;
  const OdometryDelta step{0.1, 0.0};
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RoverPose est;
    for (int k = 0; k < steps; ++k) {
      est = compose(est, simulate_odometry(step, mix_seed(s, k), 0.02));
    }
    total += std::hypot(est.x - 100.0, est.y);
  }
  const double mean = total / seeds;
  EXPECT_NEAR(mean, 2.0, 0.5);
}

TEST(Camera, RaysAreUnitAndFootprintMatchesGeometry) {
  const CameraModel cam(navcam());
  for (int r = 0; r < cam.rows(); ++r) {
    for (int c = 0; c < cam.cols(); ++c) {
      EXPECT_NEAR(cam.ray(r, c).norm(), 1.0, 1e-12);
      EXPECT_LT(cam.body_ray(r, c).z(), 0.0);
    }
  }
  // Top row looks at `far`, bottom row at `near`; the RoI is symmetric.
  const int r1 = cam.rows() - 1;
  const int c1 = cam.cols() - 1;
  const Eigen::Vector2d top_mid =
      0.5 * (cam.flat_ground_point(0, 0) + cam.flat_ground_point(0, c1));
  const Eigen::Vector2d bottom_mid =
      0.5 * (cam.flat_ground_point(r1, 0) + cam.flat_ground_point(r1, c1));
  EXPECT_NEAR(top_mid.x(), 6.0, 1e-9);
  EXPECT_NEAR(bottom_mid.x(), 1.5, 1e-9);
  EXPECT_NEAR(cam.flat_ground_point(0, 0).y(), -cam.flat_ground_point(0, c1).y(), 1e-9);
  EXPECT_GT(cam.flat_ground_point(0, 0).y(), 0.0);
}

TEST(Camera, InvalidGeometryThrows) {
  CameraGeometry g = navcam();
  g.far = g.near;
  EXPECT_THROW(CameraModel{g}, ConfigError);
  g = navcam();
  g.pitch_down = 0.0;
  EXPECT_THROW(CameraModel{g}, ConfigError);
  g = navcam();
  g.rows = 1;
  EXPECT_THROW(CameraModel{g}, ConfigError);
}

TEST(Depth, FlatGroundMatchesClosedForm) {
  const ElevationGrid flat = plane(0.0, 0.0);
  const CameraModel cam(navcam());
  const RoverPose pose = settle_on_terrain({0.0, 0.0, 0.9}, flat);
  const DepthFrame frame = render_depth(pose, cam, flat);
  for (int r = 0; r < cam.rows(); ++r) {
    for (int c = 0; c < cam.cols(); ++c) {
      ASSERT_TRUE(frame.is_valid(r, c));
      EXPECT_NEAR(frame.at(r, c), cam.flat_ground_distance(r, c), 1e-9);
    }
  }
}

TEST(Depth, CloudLiesOnTiltedPlane) {
  const double sx = 0.1, sy = 0.05;
  const ElevationGrid tilted = plane(sx, sy);
  const CameraModel cam(navcam());
  const RoverPose pose = settle_on_terrain({-1.0, 2.0, 2.5}, tilted);
  const DepthFrame frame = render_depth(pose, cam, tilted);
  const auto world = render_pointcloud(frame, cam, pose);
  ASSERT_GT(world.size(), 700u);
  for (const auto& p : world) EXPECT_NEAR(p.z(), sx * p.x() + sy * p.y(), 2e-3);
}

TEST(Depth, NoiseIsMultiplicativeAndSeeded) {
  const ElevationGrid flat = plane(0.0, 0.0);
  const CameraModel cam(navcam());
  const RoverPose pose = settle_on_terrain({0.0, 0.0, 0.0}, flat);
  const DepthFrame a = render_depth(pose, cam, flat, {0.01, 3});
  const DepthFrame b = render_depth(pose, cam, flat, {0.01, 3});
  EXPECT_EQ(a.distance, b.distance);
  double sum = 0.0, sum2 = 0.0;
  int n = 0;
  for (int r = 0; r < cam.rows(); ++r) {
    for (int c = 0; c < cam.cols(); ++c) {
      const double rel = a.at(r, c) / cam.flat_ground_distance(r, c) - 1.0;
      sum += rel;
      sum2 += rel * rel;
      ++n;
    }
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.002);
  EXPECT_NEAR(sd, 0.01, 0.001);
}

TEST(Depth, RaysBeyondTerrainAreInvalid) {
  const ElevationGrid small = plane(0.0, 0.0, 3.0);
  const CameraModel cam(navcam());
  const DepthFrame frame = render_depth(settle_on_terrain({0.0, 0.0, 0.0}, small), cam, small);
  EXPECT_FALSE(frame.is_valid(0, cam.cols() / 2));
  EXPECT_TRUE(frame.is_valid(cam.rows() - 1, cam.cols() / 2));
}

TEST(Depth, CameraBelowTerrainIsFault) {
  ElevationGrid wall = plane(0.0, 0.0, 5.0);
  // Column of ground higher than the camera right under the mount.
  for (int r = 45; r <= 55; ++r)
    for (int c = 51; c <= 56; ++c) wall.set_height(r, c, 3.0);
  const RoverPose pose{0.0, 0.0, 0.0};
  EXPECT_THROW(render_depth(pose, CameraModel(navcam()), wall), GeometryFault);
}
