#include "rover_gnc/path_repair.hpp"

#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

namespace rover_gnc {

GlobalPath make_global_path(std::vector<Eigen::Vector2d> waypoints, double corridor_half_width) {
  if (waypoints.size() < 2) throw ConfigError("global path needs at least two waypoints");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if ((waypoints[i] - waypoints[i - 1]).norm() == 0.0) {
      throw ConfigError("global path has repeated consecutive waypoints at index " +
                        std::to_string(i));
    }
  }
  if (!(corridor_half_width > 0.0)) throw ConfigError("corridor half-width must be positive");
  return GlobalPath{Polyline(std::move(waypoints)), corridor_half_width};
}

GlobalPath load_global_path(std::istream& in, double corridor_half_width) {
  std::vector<Eigen::Vector2d> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x = 0.0;
    double y = 0.0;
    if (!(ls >> x)) continue;
    std::string rest;
    if (!(ls >> y) || (ls >> rest)) {
      throw ConfigError("path line " + std::to_string(lineno) + " is not an 'x y' pair");
    }
    pts.emplace_back(x, y);
  }
  return make_global_path(std::move(pts), corridor_half_width);
}

GlobalPath load_global_path(const std::filesystem::path& path, double corridor_half_width) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open path file " + path.string());
  return load_global_path(in, corridor_half_width);
}

void save_global_path(std::ostream& out, const GlobalPath& path) {
  for (const auto& p : path.path.points()) out << p.x() << ' ' << p.y() << '\n';
}

bool segment_is_free(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const TraversabilityGrid& trav) {
  const double step = 0.5 * trav.geometry().resolution;
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    if (trav.is_hazard(a + (b - a) * (static_cast<double>(i) / n))) return false;
  }
  return true;
}

bool validate(const RepairedPath& path, const TraversabilityGrid& trav) {
  const auto& w = path.waypoints;
  if (w.size() == 1) return !trav.is_hazard(w.front());
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!segment_is_free(w[i - 1], w[i], trav)) return false;
  }
  return true;
}

std::optional<double> first_blocked_arclength(const Polyline& path, const TraversabilityGrid& trav,
                                              double from, double to) {
  const double step = 0.5 * trav.geometry().resolution;
  to = std::min(to, path.length());
  for (double s = std::max(from, 0.0); s <= to + 1e-12; s += step) {
    if (trav.is_hazard(path.point_at(s))) return s;
  }
  return std::nullopt;
}

Polyline splice(const RepairedPath& repaired, const GlobalPath& global) {
  std::vector<Eigen::Vector2d> pts = repaired.waypoints;
  const auto& g = global.path.points();
  for (std::size_t i = repaired.rejoin_index + 1; i < g.size(); ++i) {
    if (!pts.empty() && (g[i] - pts.back()).norm() < 1e-9) continue;
    pts.push_back(g[i]);
  }
  return Polyline(std::move(pts));
}

namespace {

struct Sample {
  double s;
  Eigen::Vector2d p;
  bool blocked;
};

}  // namespace

RepairedPath repair(const RoverPose& pose, const GlobalPath& global,
                    const TraversabilityGrid& trav, const RepairOptions& options) {
  const GridGeometry& g = trav.geometry();
  const Eigen::Vector2d start = pose.position();
  const auto start_idx = g.grid_of(start);
  if (!start_idx) throw ContractError("pose lies outside the traversability grid");
  if (trav.is_hazard(start_idx->row, start_idx->col)) {
    throw ContractError("pose cell is marked as a hazard");
  }

  const Polyline& path = global.path;
  const auto proj = path.project(start, options.from_arclength);
  const double s_end = std::min(proj.arclength + options.max_rejoin_dist, path.length());
  const double step = 0.5 * g.resolution;

  std::vector<Sample> samples;
  for (double s = proj.arclength;; s += step) {
    const double ss = std::min(s, s_end);
    const Eigen::Vector2d p = path.point_at(ss);
    samples.push_back({ss, p, trav.is_hazard(p)});
    if (ss >= s_end) break;
  }

  // Rejoin candidates: everything when the window is clear, otherwise
  // samples past the first blocked stretch with `rejoin_clearance` of free
  // path on both sides (the far side of an obstacle is usually unseen).
  const auto first_blocked = std::find_if(samples.begin(), samples.end(),
                                          [](const Sample& x) { return x.blocked; });
  std::vector<std::size_t> candidates;
  if (first_blocked == samples.end()) {
    for (std::size_t k = 0; k < samples.size(); ++k) candidates.push_back(k);
  } else {
    const std::size_t fb = static_cast<std::size_t>(first_blocked - samples.begin());
    const int clear_n = static_cast<int>(std::ceil(options.rejoin_clearance / step));
    for (std::size_t k = fb + 1; k < samples.size(); ++k) {
      bool ok = true;
      const std::size_t lo = k >= static_cast<std::size_t>(clear_n) ? k - clear_n : 0;
      for (std::size_t m = lo; m < samples.size() && m <= k + clear_n; ++m) {
        if (samples[m].blocked) {
          ok = false;
          break;
        }
      }
      if (ok) candidates.push_back(k);
    }
  }
  if (candidates.empty()) {
    throw PathBlockedError("no free rejoin point within " +
                           std::to_string(options.max_rejoin_dist) + " m");
  }

  // Planning window: bounding box of pose and samples, padded.
  Eigen::Vector2d lo = start;
  Eigen::Vector2d hi = start;
  for (const auto& x : samples) {
    lo = lo.cwiseMin(x.p);
    hi = hi.cwiseMax(x.p);
  }
  const double pad = std::max(3.0, 0.5 * options.max_rejoin_dist);
  const GridIndex a = g.nearest(lo - Eigen::Vector2d::Constant(pad));
  const GridIndex b = g.nearest(hi + Eigen::Vector2d::Constant(pad));
  const int r0 = std::max(a.row, 0);
  const int c0 = std::max(a.col, 0);
  const int r1 = std::min(b.row, g.rows - 1);
  const int c1 = std::min(b.col, g.cols - 1);
  const int wr = r1 - r0 + 1;
  const int wc = c1 - c0 + 1;
  auto local = [&](int r, int c) { return static_cast<std::size_t>(r - r0) * wc + (c - c0); };
  auto inside = [&](int r, int c) { return r >= r0 && r <= r1 && c >= c0 && c <= c1; };
  auto free_cell = [&](int r, int c) { return inside(r, c) && !trav.is_hazard(r, c); };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(wr) * wc, kInf);
  std::vector<std::int64_t> parent(dist.size(), -1);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[local(start_idx->row, start_idx->col)] = 0.0;
  open.emplace(0.0, local(start_idx->row, start_idx->col));
  const double diag = std::sqrt(2.0);
  while (!open.empty()) {
    const auto [d, k] = open.top();
    open.pop();
    if (d > dist[k]) continue;
    const int r = r0 + static_cast<int>(k / wc);
    const int c = c0 + static_cast<int>(k % wc);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int rr = r + dr;
        const int cc = c + dc;
        if (!free_cell(rr, cc)) continue;
        // No corner cutting past hazards on diagonal moves.
        if (dr != 0 && dc != 0 && (!free_cell(r + dr, c) || !free_cell(r, c + dc))) continue;
        const double nd = d + ((dr != 0 && dc != 0) ? diag : 1.0);
        const std::size_t nk = local(rr, cc);
        if (nd < dist[nk]) {
          dist[nk] = nd;
          parent[nk] = static_cast<std::int64_t>(k);
          open.emplace(nd, nk);
        }
      }
    }
  }

  std::size_t chosen = samples.size();
  std::size_t goal_key = 0;
  for (std::size_t k : candidates) {
    const auto idx = g.grid_of(samples[k].p);
    if (!idx || !inside(idx->row, idx->col)) continue;
    const std::size_t key = local(idx->row, idx->col);
    if (dist[key] < kInf) {
      chosen = k;
      goal_key = key;
      break;
    }
  }
  if (chosen == samples.size()) {
    throw PathBlockedError("global path not reachable within the rejoin window");
  }

  std::vector<Eigen::Vector2d> cells;
  for (std::int64_t k = static_cast<std::int64_t>(goal_key); k >= 0; k = parent[k]) {
    const int r = r0 + static_cast<int>(k / wc);
    const int c = c0 + static_cast<int>(k % wc);
    cells.push_back(g.world_of({r, c}));
  }
  std::reverse(cells.begin(), cells.end());
  cells.front() = start;
  if (cells.size() == 1) cells.push_back(samples[chosen].p);
  else cells.back() = samples[chosen].p;

  // Greedy line-of-sight shortcutting.
  RepairedPath out;
  out.waypoints.push_back(cells.front());
  std::size_t i = 0;
  while (i + 1 < cells.size()) {
    std::size_t j = cells.size() - 1;
    while (j > i + 1 && !segment_is_free(cells[i], cells[j], trav)) --j;
    out.waypoints.push_back(cells[j]);
    i = j;
  }
  out.rejoin_arclength = samples[chosen].s;
  out.rejoin_index = path.segment_at(samples[chosen].s);
  return out;
}

}  // namespace rover_gnc
