#include "rover_gnc/errors.hpp"
#include "rover_gnc/hazard_detector.hpp"
#include "rover_gnc/terrain.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

using namespace rover_gnc;

namespace {

ElevationGrid flat_ground(double extent = 4.0, double res = 0.02) {
  GridGeometry g;
  g.resolution = res;
  g.rows = g.cols = static_cast<int>(std::lround(2.0 * extent / res)) + 1;
  g.origin = Eigen::Vector2d(-extent, -extent);
  return ElevationGrid(g);
}

struct Bench {
  ElevationGrid ground = flat_ground();
  CameraModel cam{CameraGeometry{}};
  RoverPose pose = settle_on_terrain({0.0, 0.0, 0.0}, ground);
  CalibrationTable table =
      calibrate(render_depth(pose, cam, ground), cam.height(), 0.1, 0.1, cam.corner_pairs());
};

DepthFrame uniform_frame(int rows, int cols, double d) {
  DepthFrame f(rows, cols);
  std::fill(f.distance.begin(), f.distance.end(), d);
  std::fill(f.valid.begin(), f.valid.end(), 1);
  return f;
}

CalibrationTable uniform_table(int rows, int cols, double d_cal) {
  return calibrate(uniform_frame(rows, cols, d_cal), 1.0, 0.1, 0.1, {});
}

// Oracle homography: solve the 8x8 system for h11..h32 directly.
Eigen::Matrix3d oracle_homography(const std::array<CornerPair, 4>& pairs) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int k = 0; k < 4; ++k) {
    const double u = pairs[k].first.x(), v = pairs[k].first.y();
    const double x = pairs[k].second.x(), y = pairs[k].second.y();
    a.row(2 * k) << u, v, 1, 0, 0, 0, -u * x, -v * x;
    a.row(2 * k + 1) << 0, 0, 0, u, v, 1, -u * y, -v * y;
    b(2 * k) = x;
    b(2 * k + 1) = y;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

}  // namespace

TEST(RayGeometry, WorkedValues) {
  EXPECT_DOUBLE_EQ(min_tolerated_distance(2.0, 1.0, 0.0), 2.0);
  EXPECT_NEAR(min_tolerated_distance(2.0, 1.0, 0.1), 1.8, 1e-15);
  EXPECT_NEAR(max_tolerated_distance(2.0, 1.0, 0.1), 2.2, 1e-15);
}

TEST(RayGeometry, ScaleInvarianceAndMonotonicity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> h(0.5, 2.0), frac(0.01, 0.9), d(0.5, 10.0),
      lambda(0.1, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double hc = h(rng), tn = frac(rng) * hc, tf = frac(rng), dc = d(rng), l = lambda(rng);
    EXPECT_NEAR(min_tolerated_distance(l * dc, l * hc, l * tn),
                l * min_tolerated_distance(dc, hc, tn), 1e-12 * l * dc);
    EXPECT_NEAR(max_tolerated_distance(l * dc, l * hc, l * tf),
                l * max_tolerated_distance(dc, hc, tf), 1e-12 * l * dc);
    EXPECT_LT(min_tolerated_distance(dc, hc, tn + 0.01 * hc), min_tolerated_distance(dc, hc, tn));
  }
}

TEST(Calibrate, TableMatchesRayGeometryPerPixel) {
  const Bench b;
  ASSERT_EQ(b.table.rows, b.cam.rows());
  for (std::size_t k = 0; k < b.table.d_cal.size(); ++k) {
    EXPECT_EQ(b.table.d_min[k], b.table.d_cal[k] * (b.table.h_cam - 0.1) / b.table.h_cam);
    EXPECT_LT(b.table.d_min[k], b.table.d_cal[k]);
    EXPECT_GT(b.table.d_max[k], b.table.d_cal[k]);
  }
}

TEST(Calibrate, Errors) {
  DepthFrame f = uniform_frame(4, 4, 2.0);
  EXPECT_THROW(calibrate(f, 1.0, 1.0, 0.1, {}), ConfigError);
  EXPECT_THROW(calibrate(f, 1.0, -0.1, 0.1, {}), ConfigError);
  f.valid[5] = 0;
  EXPECT_THROW(calibrate(f, 1.0, 0.1, 0.1, {}), CalibrationError);
}

TEST(Calibrate, TextRoundTrip) {
  const Bench b;
  std::stringstream ss;
  save_calibration(ss, b.table);
  const CalibrationTable back = load_calibration(ss);
  EXPECT_EQ(back.rows, b.table.rows);
  EXPECT_EQ(back.cols, b.table.cols);
  EXPECT_EQ(back.d_cal, b.table.d_cal);
  EXPECT_EQ(back.d_min, b.table.d_min);
  EXPECT_EQ(back.d_max, b.table.d_max);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(back.corners[k].first, b.table.corners[k].first);
    EXPECT_EQ(back.corners[k].second, b.table.corners[k].second);
  }
  std::istringstream bad("rows 3\n");
  EXPECT_THROW(load_calibration(bad), Error);
}

TEST(Detect, CalibrationFrameIsFree) {
  const Bench b;
  const HazardMask mask = detect(render_depth(b.pose, b.cam, b.ground), b.table);
  EXPECT_FALSE(mask.any_hazard());
  EXPECT_EQ(mask.count(PixelClass::kFree), mask.cells.size());
}

TEST(Detect, ClusterFilterUses8Connectivity) {
  const CalibrationTable table = uniform_table(10, 10, 2.0);
  DepthFrame f = uniform_frame(10, 10, 2.0);
  f.distance[f.index(1, 1)] = 1.0;  // isolated
  EXPECT_FALSE(detect(f, table, 4).any_hazard());
  for (int k = 0; k < 4; ++k) f.distance[f.index(5 + k, 2 + k)] = 1.0;  // diagonal chain
  const HazardMask mask = detect(f, table, 4);
  EXPECT_EQ(mask.count(PixelClass::kPositive), 4u);
  EXPECT_EQ(mask.at(1, 1), PixelClass::kFree);
}

TEST(Detect, PitsAndInvalidPixels) {
  const CalibrationTable table = uniform_table(6, 6, 2.0);
  DepthFrame f = uniform_frame(6, 6, 2.0);
  for (int r = 2; r < 4; ++r)
    for (int c = 2; c < 4; ++c) f.distance[f.index(r, c)] = 2.5;
  f.valid[0] = 0;
  const HazardMask mask = detect(f, table, 4);
  EXPECT_EQ(mask.count(PixelClass::kNegative), 4u);
  EXPECT_EQ(mask.at(0, 0), PixelClass::kInvalid);
  EXPECT_THROW(detect(uniform_frame(5, 6, 2.0), table), ContractError);
}

TEST(Detect, RockHeightSweepIsSound) {
  const Bench b;
  // Rock centered in the footprint, noiseless depth.
  const double mid = 0.5 * (CameraGeometry{}.near + CameraGeometry{}.far);
  for (double h : {0.05, 0.08, 0.12, 0.15, 0.2, 0.3, 0.5}) {
    const ElevationGrid scene = place_obstacles(b.ground, {{{mid, 0.0}, 0.3, h}});
    const HazardMask mask = detect(render_depth(b.pose, b.cam, scene), b.table);
    EXPECT_EQ(mask.count(PixelClass::kPositive) > 0, h > 0.1) << "h=" << h;
  }
}

TEST(Perspective, IdentityAndTranslation) {
  const std::array<Eigen::Vector2d, 4> sq = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                             Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 1)};
  std::array<CornerPair, 4> same, moved;
  for (int k = 0; k < 4; ++k) {
    same[k] = {sq[k], sq[k]};
    moved[k] = {sq[k], sq[k] + Eigen::Vector2d(1, 2)};
  }
  EXPECT_TRUE(fit_perspective(same).matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 2) = 1;
  t(1, 2) = 2;
  EXPECT_TRUE(fit_perspective(moved).matrix().isApprox(t, 1e-12));
}

TEST(Perspective, GenericQuadMatchesLinearOracle) {
  const std::array<CornerPair, 4> pairs = {
      CornerPair{{0, 0}, {1.9, 0.8}}, CornerPair{{63, 0}, {1.9, -0.8}},
      CornerPair{{63, 31}, {0.9, -0.45}}, CornerPair{{0, 31}, {0.9, 0.45}}};
  const PerspectiveTransform tf = fit_perspective(pairs);
  const Eigen::Matrix3d oracle = oracle_homography(pairs);
  EXPECT_LT((tf.matrix() - oracle).cwiseAbs().maxCoeff(), 1e-9);
  for (const auto& [px, xy] : pairs) EXPECT_LT((tf.apply(px) - xy).norm(), 1e-9);
  for (const auto& [px, xy] : pairs) EXPECT_LT((tf.inverse().apply(xy) - px).norm(), 1e-6);
}

TEST(Perspective, CalibratedCameraMapsEveryPixelToGround) {
  const Bench b;
  const PerspectiveTransform tf = fit_perspective(b.table.corners);
  for (int r = 0; r < b.cam.rows(); r += 3) {
    for (int c = 0; c < b.cam.cols(); c += 5) {
      EXPECT_LT((tf.apply({c, r}) - b.cam.flat_ground_point(r, c)).norm(), 1e-6);
    }
  }
}

TEST(Perspective, CollinearCornersThrow) {
  const std::array<CornerPair, 4> pairs = {
      CornerPair{{0, 0}, {0, 0}}, CornerPair{{1, 1}, {1, 0}}, CornerPair{{2, 2}, {1, 1}},
      CornerPair{{0, 1}, {0, 1}}};
  EXPECT_THROW(fit_perspective(pairs), SingularGeometryError);
}

TEST(Traversability, DilationMatchesDistanceOracle) {
  GridGeometry g;
  g.rows = 40;
  g.cols = 50;
  g.resolution = 0.1;
  std::mt19937_64 rng(3);
  std::bernoulli_distribution seedcell(0.01);
  TraversabilityGrid grid(g, GridFrame::kWorld);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) grid.set(r, c, seedcell(rng));
  const TraversabilityGrid before = grid;
  const double margin = 0.25;
  grid.dilate(margin);
  const int k = static_cast<int>(std::ceil(margin / g.resolution - 1e-9));
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      bool near = false;
      for (int rr = 0; rr < g.rows && !near; ++rr)
        for (int cc = 0; cc < g.cols && !near; ++cc)
          near = before.is_hazard(rr, cc) && (rr - r) * (rr - r) + (cc - c) * (cc - c) <= k * k;
      EXPECT_EQ(grid.is_hazard(r, c), near) << r << "," << c;
    }
  }
}

TEST(Traversability, SingleCellDilationIsDisc) {
  GridGeometry g;
  g.rows = g.cols = 11;
  g.resolution = 0.1;
  TraversabilityGrid grid(g, GridFrame::kRover);
  grid.set(5, 5, true);
  grid.dilate(0.2);
  EXPECT_EQ(grid.hazard_count(), 13u);  // lattice points with dr^2 + dc^2 <= 4
  EXPECT_TRUE(grid.is_hazard(5, 7));
  EXPECT_FALSE(grid.is_hazard(7, 7));
}

TEST(ProjectHazards, FreeMaskGivesEmptyGrid) {
  const Bench b;
  const HazardMask mask = detect(render_depth(b.pose, b.cam, b.ground), b.table);
  const auto grid = project_hazards(mask, fit_perspective(b.table.corners), std::nullopt, 0.3, 0.1);
  EXPECT_EQ(grid.hazard_count(), 0u);
}

TEST(ProjectHazards, CornerPixelLandsOnCornerCell) {
  const Bench b;
  HazardMask mask;
  mask.rows = b.cam.rows();
  mask.cols = b.cam.cols();
  mask.cells.assign(std::size_t(mask.rows) * mask.cols, PixelClass::kFree);
  mask.cells[0] = PixelClass::kPositive;
  const auto grid = project_hazards(mask, fit_perspective(b.table.corners), std::nullopt, 0.0, 0.1);
  EXPECT_EQ(grid.frame(), GridFrame::kRover);
  EXPECT_EQ(grid.hazard_count(), 1u);
  EXPECT_TRUE(grid.is_hazard(b.table.corners[0].second));
}

TEST(ProjectHazards, CommutesWithRigidPose) {
  const Bench b;
  const ElevationGrid scene = place_obstacles(b.ground, {{{1.4, 0.2}, 0.25, 0.3}});
  const HazardMask mask = detect(render_depth(b.pose, b.cam, scene), b.table);
  ASSERT_TRUE(mask.any_hazard());
  const PerspectiveTransform tf = fit_perspective(b.table.corners);
  const RoverPose pose{12.3, -4.1, 0.8};
  const auto rover = project_hazards(mask, tf, std::nullopt, 0.0, 0.1);
  const auto world = project_hazards(mask, tf, pose, 0.0, 0.1);
  const Eigen::Rotation2Dd rot(pose.heading);
  const GridGeometry& rg = rover.geometry();
  const GridGeometry& wg = world.geometry();
  for (int r = 0; r < rg.rows; ++r) {
    for (int c = 0; c < rg.cols; ++c) {
      if (!rover.is_hazard(r, c)) continue;
      const Eigen::Vector2d p = pose.position() + rot * rg.world_of({r, c});
      const GridIndex idx = wg.nearest(p);
      bool hit = false;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          hit = hit || (wg.contains(idx.row + dr, idx.col + dc) &&
                        world.is_hazard(idx.row + dr, idx.col + dc));
      EXPECT_TRUE(hit);
    }
  }
}
