#include "rover_gnc/errors.hpp"
#include "rover_gnc/global_localizer.hpp"
#include "rover_gnc/mode_selector.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace rover_gnc;

namespace {

ElevationGrid grid(int rows, int cols, double res, Eigen::Vector2d origin = {0.0, 0.0}) {
  GridGeometry g;
  g.rows = rows;
  g.cols = cols;
  g.resolution = res;
  g.origin = origin;
  return ElevationGrid(g);
}

ElevationGrid random_grid(int rows, int cols, std::mt19937_64& rng) {
  ElevationGrid out = grid(rows, cols, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.set_height(r, c, n(rng));
  return out;
}

using oracle::crop;
using oracle::ncc_score;
using oracle::raw_score;

}  // namespace

TEST(Downsample, BlockMeanOnLattice) {
  ElevationGrid fine = grid(4, 4, 0.5);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) fine.set_height(r, c, r * 4 + c);
  // Lattice at -0.25 puts coarse centers at 0.25 and 1.25: 2x2 blocks.
  const ElevationGrid coarse = downsample_local(fine, 1.0, {-0.75, -0.75});
  ASSERT_EQ(coarse.rows(), 2);
  ASSERT_EQ(coarse.cols(), 2);
  EXPECT_DOUBLE_EQ(coarse.height(0, 0), (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(coarse.height(1, 1), (10 + 11 + 14 + 15) / 4.0);
  EXPECT_NEAR(coarse.origin().x(), 0.25, 1e-12);
}

TEST(Downsample, HalfValidBlocksAreInvalid) {
  ElevationGrid fine = grid(4, 4, 0.5);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) fine.set_height(r, c, r * 4 + c);
  fine.invalidate(0, 0);
  fine.invalidate(2, 2);
  fine.invalidate(2, 3);
  const ElevationGrid coarse = downsample_local(fine, 1.0, {-0.75, -0.75});
  EXPECT_TRUE(coarse.is_valid(0, 0));  // 3 of 4
  EXPECT_DOUBLE_EQ(coarse.height(0, 0), (1 + 4 + 5) / 3.0);
  EXPECT_FALSE(coarse.is_valid(1, 1));  // 2 of 4
  EXPECT_THROW(downsample_local(fine, 0.75, {0.0, 0.0}), ConfigError);
  ElevationGrid empty = grid(4, 4, 0.5);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) empty.invalidate(r, c);
  EXPECT_THROW(downsample_local(empty, 1.0, {0.0, 0.0}), InsufficientDataError);
}

TEST(Gradient, PlaneHasConstantMagnitude) {
  ElevationGrid g = grid(6, 7, 0.5);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 7; ++c) {
      const Eigen::Vector2d w = g.world_of({r, c});
      g.set_height(r, c, 0.3 * w.x() - 0.4 * w.y() + 2.0);
    }
  const ElevationGrid m = gradient_magnitude(g);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 7; ++c) EXPECT_NEAR(m.height(r, c), 0.5, 1e-12);
  g.invalidate(3, 3);
  const ElevationGrid holes = gradient_magnitude(g);
  EXPECT_FALSE(holes.is_valid(3, 3));
  EXPECT_FALSE(holes.is_valid(3, 2));
  EXPECT_FALSE(holes.is_valid(2, 3));
  EXPECT_TRUE(holes.is_valid(2, 2));
  EXPECT_THROW(gradient_magnitude(grid(2, 5, 1.0)), ContractError);
}

TEST(Correlation, MatchesBruteForceOracle) {
  std::mt19937_64 rng(5);
  const ElevationGrid O = random_grid(20, 24, rng);
  ElevationGrid L = random_grid(6, 5, rng);
  L.invalidate(2, 2);
  for (CorrelationMode mode : {CorrelationMode::kRaw, CorrelationMode::kNormalized}) {
    const MatchResult m = cross_correlate(L, O, {mode});
    ASSERT_EQ(m.rows, 15);
    ASSERT_EQ(m.cols, 20);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) {
        const double expect =
            mode == CorrelationMode::kRaw ? raw_score(L, O, i, j) : ncc_score(L, O, i, j);
        EXPECT_NEAR(m.at(i, j), expect, 1e-12);
      }
  }
}

TEST(Correlation, CropArgmaxMatchesOracle) {
  std::mt19937_64 rng(64);
  std::uniform_int_distribution<int> pos(0, 48);
  for (int trial = 0; trial < 100; ++trial) {
    const ElevationGrid O = gradient_magnitude(oracle::quantized_random_map(64, rng));
    const ElevationGrid L = crop(O, pos(rng), pos(rng), 16, 16);
    const MatchResult m = cross_correlate(L, O);
    const auto [br, bc] = oracle::raw_argmax(L, O);
    EXPECT_EQ(m.best_row, br);
    EXPECT_EQ(m.best_col, bc);
    // On an exact crop the normalized score peaks at the crop position.
    const MatchResult n = cross_correlate(L, O, {CorrelationMode::kNormalized});
    EXPECT_EQ(n.at(n.best_row, n.best_col), 1.0);
  }
}

TEST(Correlation, ElevationOffsetLeavesScoresUnchanged) {
  // Heights on a 1/1024 lattice plus a dyadic constant add exactly, so the
  // gradients and therefore R are identical bit for bit.
  std::mt19937_64 rng(65);
  std::uniform_int_distribution<int> pos(0, 48);
  for (int trial = 0; trial < 20; ++trial) {
    const ElevationGrid elev = oracle::quantized_random_map(64, rng);
    const ElevationGrid local = crop(elev, pos(rng), pos(rng), 16, 16);
    for (CorrelationMode mode : {CorrelationMode::kRaw, CorrelationMode::kNormalized}) {
      const MatchResult a =
          cross_correlate(gradient_magnitude(local), gradient_magnitude(elev), {mode});
      const MatchResult b = cross_correlate(gradient_magnitude(oracle::add_constant(local, 37.25)),
                                            gradient_magnitude(elev), {mode});
      const MatchResult c = cross_correlate(gradient_magnitude(local),
                                            gradient_magnitude(oracle::add_constant(elev, -6.5)),
                                            {mode});
      EXPECT_EQ(a.scores, b.scores);
      EXPECT_EQ(a.scores, c.scores);
    }
  }
  // Arbitrary constants can round the differences by an ulp; R moves by no more.
  const ElevationGrid elev = oracle::quantized_random_map(32, rng);
  const ElevationGrid local = crop(elev, 5, 9, 12, 12);
  const MatchResult a = cross_correlate(gradient_magnitude(local), gradient_magnitude(elev));
  const MatchResult b = cross_correlate(gradient_magnitude(oracle::add_constant(local, 0.1)),
                                        gradient_magnitude(elev));
  for (std::size_t k = 0; k < a.scores.size(); ++k) EXPECT_NEAR(a.scores[k], b.scores[k], 1e-12);
}

TEST(Correlation, SharpnessAndAcceptance) {
  std::mt19937_64 rng(3);
  const ElevationGrid O = random_grid(30, 30, rng);
  const MatchResult m = cross_correlate(crop(O, 7, 11, 10, 10), O, {CorrelationMode::kNormalized});
  EXPECT_TRUE(m.accepted);
  EXPECT_DOUBLE_EQ(m.peak, 1.0);
  EXPECT_GT(m.sharpness, 1.2);
  EXPECT_DOUBLE_EQ(m.valid_fraction, 1.0);

  const ElevationGrid flat = grid(30, 30, 1.0);
  const MatchResult f = cross_correlate(grid(10, 10, 1.0), flat, {CorrelationMode::kNormalized});
  EXPECT_FALSE(f.accepted);
  EXPECT_THROW(cross_correlate(O, crop(O, 0, 0, 10, 10)), ContractError);
}

TEST(Correlation, CsvAndSummary) {
  std::mt19937_64 rng(1);
  const ElevationGrid O = random_grid(5, 5, rng);
  const MatchResult m = cross_correlate(crop(O, 1, 2, 3, 3), O);
  std::ostringstream csv;
  write_match_csv(csv, m);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), m.rows);
  EXPECT_EQ(std::count(text.begin(), text.end(), ','), m.rows * (m.cols - 1));
  EXPECT_NE(match_summary(m).find("accepted="), std::string::npos);
  EXPECT_EQ(parse_correlation_mode("ncc"), CorrelationMode::kNormalized);
  EXPECT_THROW(parse_correlation_mode("zncc"), ConfigError);
}

TEST(Correction, ShiftsPoseToMatchedCell) {
  const ElevationGrid O = grid(20, 20, 0.5, {-5.0, -5.0});
  MatchResult m;
  m.accepted = true;
  m.best_row = 4;
  m.best_col = 6;
  const RoverPose est{1.0, 2.0, 0.3};
  // Orbital cell (4,6) is at (-2, -3); the local anchor claims (-1, -1).
  const Correction c = apply_correction(m, est, O, {-1.0, -1.0});
  ASSERT_TRUE(c.applied);
  EXPECT_DOUBLE_EQ(c.pose.x, 0.0);
  EXPECT_DOUBLE_EQ(c.pose.y, 0.0);
  EXPECT_DOUBLE_EQ(c.pose.heading, 0.3);

  const Correction gated = apply_correction(m, est, O, {-1.0, -1.0}, 1.0);
  EXPECT_FALSE(gated.applied);
  EXPECT_TRUE(gated.gated);
  EXPECT_EQ(gated.pose.x, est.x);

  m.accepted = false;
  EXPECT_FALSE(apply_correction(m, est, O, {-1.0, -1.0}).applied);
}

TEST(CropToValid, TightBoundingBox) {
  ElevationGrid g = grid(6, 6, 1.0, {10.0, 20.0});
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) g.invalidate(r, c);
  EXPECT_FALSE(crop_to_valid(g));
  g.set_height(1, 2, 5.0);
  g.set_height(3, 4, 6.0);
  const auto c = crop_to_valid(g);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->rows(), 3);
  EXPECT_EQ(c->cols(), 3);
  EXPECT_EQ(c->origin(), Eigen::Vector2d(12.0, 21.0));
  EXPECT_DOUBLE_EQ(c->height(2, 2), 6.0);
  EXPECT_FALSE(c->is_valid(0, 2));
}

TEST(ModeSelector, PolicyAndHysteresis) {
  EXPECT_EQ(select_mode(ModePolicy::kFullOnly, NavMode::kEfficient, 0, 0, 0), NavMode::kFull);
  EXPECT_EQ(select_mode(ModePolicy::kEfficientOnly, NavMode::kFull, 99, 0, 0),
            NavMode::kEfficient);
  EXPECT_EQ(select_mode(ModePolicy::kAuto, NavMode::kEfficient, 5, 0, 0), NavMode::kEfficient);
  EXPECT_EQ(select_mode(ModePolicy::kAuto, NavMode::kEfficient, 6, 0, 0), NavMode::kFull);
  EXPECT_EQ(select_mode(ModePolicy::kAuto, NavMode::kFull, 0, 0, 49.0), NavMode::kFull);
  EXPECT_EQ(select_mode(ModePolicy::kAuto, NavMode::kFull, 0, 0, 50.0), NavMode::kEfficient);
  EXPECT_EQ(parse_mode_policy("full_only"), ModePolicy::kFullOnly);
  EXPECT_THROW(parse_mode_policy("fast"), ConfigError);
}

TEST(ModeSelector, TraceEscalatesAndRelaxes) {
  ModeSelector sel(ModePolicy::kAuto);
  EXPECT_EQ(sel.mode(), NavMode::kEfficient);
  for (int k = 0; k < 5; ++k) {
    sel.record_replan(10.0 + k);
    EXPECT_FALSE(sel.update(10.0 + k));
  }
  sel.record_replan(17.0);
  EXPECT_EQ(sel.recent_replans(17.0), 6);
  const auto up = sel.update(17.0);
  ASSERT_TRUE(up);
  EXPECT_EQ(sel.mode(), NavMode::kFull);
  sel.record_hazard(40.0);
  EXPECT_FALSE(sel.update(80.0));
  const auto down = sel.update(90.0);
  ASSERT_TRUE(down);
  EXPECT_EQ(sel.mode(), NavMode::kEfficient);
  EXPECT_EQ(sel.recent_replans(90.0), 0);
  // Old replans slide out of the window.
  sel.record_replan(100.0);
  EXPECT_EQ(sel.recent_replans(250.0), 0);
}
