// Command-line front end: run / calibrate / match / replay.

#include "rover_gnc/dem_io.hpp"
#include "rover_gnc/errors.hpp"
#include "rover_gnc/global_localizer.hpp"
#include "rover_gnc/mission.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFault = 2;
constexpr int kExitConfig = 3;

int cmd_run(const std::string& scenario, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed, const std::string& mode) {
  rover_gnc::ScenarioConfig cfg = rover_gnc::load_scenario(scenario);
  if (seed) rover_gnc::override_seeds(cfg, *seed);
  if (!mode.empty()) cfg.policy = rover_gnc::parse_mode_policy(mode);
  const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir);
  const rover_gnc::RunResult result = rover_gnc::run_scenario(cfg);
  rover_gnc::emit_metrics(result, dir);
  rover_gnc::write_metrics_csv(std::cout, result.metrics);
  return result.metrics.faulted() ? kExitFault : kExitOk;
}

int cmd_calibrate(const std::string& scenario, const std::string& out) {
  const rover_gnc::ScenarioConfig cfg = rover_gnc::load_scenario(scenario);
  const rover_gnc::CalibrationTable table = rover_gnc::calibrate_scenario(cfg);
  if (out.empty()) {
    rover_gnc::save_calibration(std::cout, table);
  } else {
    rover_gnc::save_calibration(out, table);
  }
  return kExitOk;
}

int cmd_match(const std::string& local_path, const std::string& orbital_path,
              const std::string& mode, const std::string& csv) {
  const rover_gnc::ElevationGrid local = rover_gnc::read_esri_ascii(local_path);
  const rover_gnc::ElevationGrid orbital = rover_gnc::read_esri_ascii(orbital_path);
  rover_gnc::MatchParams params;
  params.mode = rover_gnc::parse_correlation_mode(mode);
  const rover_gnc::ElevationGrid coarse =
      local.resolution() == orbital.resolution()
          ? local
          : rover_gnc::downsample_local(local, orbital.resolution(), orbital.origin());
  const auto grad = rover_gnc::crop_to_valid(rover_gnc::gradient_magnitude(coarse));
  if (!grad) throw rover_gnc::InsufficientDataError("local map has no valid gradient cells");
  const rover_gnc::MatchResult match =
      rover_gnc::cross_correlate(*grad, rover_gnc::gradient_magnitude(orbital), params);
  if (!csv.empty()) rover_gnc::write_match_csv(csv, match);
  const Eigen::Vector2d at = orbital.world_of({match.best_row, match.best_col});
  const Eigen::Vector2d shift = at - grad->origin();
  std::cout << rover_gnc::match_summary(match) << '\n'
            << fmt::format("shift dx={} dy={}\n", rover_gnc::format_double(shift.x()),
                           rover_gnc::format_double(shift.y()));
  return kExitOk;
}

int cmd_replay(const std::string& trajectory) {
  std::ifstream in(trajectory);
  if (!in) throw rover_gnc::IoError("cannot open " + trajectory);
  const auto rows = rover_gnc::read_trajectory_csv(in);
  std::cout << "t,truth_x,truth_y,est_x,est_y,error_m,mode\n";
  for (const auto& r : rows) {
    const double err = std::hypot(r.estimate.x - r.truth.x, r.estimate.y - r.truth.y);
    std::cout << fmt::format("{:.1f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.t, r.truth.x,
                             r.truth.y, r.estimate.x, r.estimate.y, err,
                             rover_gnc::to_string(r.mode));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level rover navigation simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string mode;
  auto* run = app.add_subcommand("run", "Run a scenario and write metrics");
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override every noise seed");
  run->add_option("--mode", mode, "Navigation policy")
      ->check(CLI::IsMember({"efficient", "full", "auto"}));

  std::string cal_out;
  auto* cal = app.add_subcommand("calibrate", "Print the flat-ground calibration table");
  cal->add_option("scenario", scenario, "Scenario file")->required();
  cal->add_option("--out", cal_out, "Write the table to this file");

  std::string local_dem;
  std::string orbital_dem;
  std::string corr = "raw";
  std::string csv;
  auto* match = app.add_subcommand("match", "Correlate a local DEM against an orbital DEM");
  match->add_option("local", local_dem, "Local map (ESRI ASCII)")->required();
  match->add_option("orbital", orbital_dem, "Orbital map (ESRI ASCII)")->required();
  match->add_option("--correlation", corr, "raw or ncc")->check(CLI::IsMember({"raw", "ncc"}));
  match->add_option("--csv", csv, "Write the full result matrix here");

  std::string trajectory;
  auto* replay = app.add_subcommand("replay", "Re-emit plot data from a trajectory file");
  replay->add_option("trajectory", trajectory, "trajectory.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(scenario, out_dir, seed, mode);
    if (*cal) return cmd_calibrate(scenario, cal_out);
    if (*match) return cmd_match(local_dem, orbital_dem, corr, csv);
    if (*replay) return cmd_replay(trajectory);
  } catch (const rover_gnc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rover_gnc::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rover_gnc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
  return kExitOk;
}
