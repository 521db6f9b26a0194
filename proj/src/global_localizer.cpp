#include "rover_gnc/global_localizer.hpp"

#include "rover_gnc/dem_io.hpp"
#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace rover_gnc {

ElevationGrid downsample_local(const ElevationGrid& local, double coarse_resolution,
                               const Eigen::Vector2d& lattice_origin) {
  const int k = resolution_ratio(coarse_resolution, local.resolution());
  auto coarse_index = [&](double v, double lattice) {
    return static_cast<int>(std::floor((v - lattice) / coarse_resolution + 0.5 + 1e-9));
  };
  const Eigen::Vector2d first = local.origin();
  const Eigen::Vector2d last = local.geometry().max_center();
  const int j0 = coarse_index(first.x(), lattice_origin.x());
  const int j1 = coarse_index(last.x(), lattice_origin.x());
  const int i0 = coarse_index(first.y(), lattice_origin.y());
  const int i1 = coarse_index(last.y(), lattice_origin.y());

  GridGeometry g;
  g.resolution = coarse_resolution;
  g.rows = i1 - i0 + 1;
  g.cols = j1 - j0 + 1;
  g.origin = lattice_origin + coarse_resolution * Eigen::Vector2d(j0, i0);

  std::vector<double> sum(g.size(), 0.0);
  std::vector<int> count(g.size(), 0);
  for (int r = 0; r < local.rows(); ++r) {
    for (int c = 0; c < local.cols(); ++c) {
      if (!local.is_valid(r, c)) continue;
      const Eigen::Vector2d p = local.world_of({r, c});
      const int i = coarse_index(p.y(), lattice_origin.y()) - i0;
      const int j = coarse_index(p.x(), lattice_origin.x()) - j0;
      const std::size_t key = g.flat(i, j);
      sum[key] += local.height(r, c);
      ++count[key];
    }
  }

  ElevationGrid out(g, 0.0, false);
  std::size_t valid = 0;
  for (int i = 0; i < g.rows; ++i) {
    for (int j = 0; j < g.cols; ++j) {
      const std::size_t key = g.flat(i, j);
      // Strictly more than half of the k*k block must be known.
      if (2 * count[key] > k * k) {
        out.set_height(i, j, sum[key] / count[key]);
        ++valid;
      }
    }
  }
  if (valid == 0) throw InsufficientDataError("no downsampled block has enough valid cells");
  return out;
}

ElevationGrid downsample_local(const LocalRollingMap& local, double coarse_resolution,
                               const Eigen::Vector2d& lattice_origin) {
  return downsample_local(local.heights(), coarse_resolution, lattice_origin);
}

ElevationGrid gradient_magnitude(const ElevationGrid& grid) {
  if (grid.rows() < 3 || grid.cols() < 3) {
    throw ContractError("gradient needs a grid of at least 3x3 cells");
  }
  const double res = grid.resolution();
  ElevationGrid out(grid.geometry(), 0.0, false);
  // Difference along one axis: central inside, one-sided at the border.
  auto diff = [&](int r, int c, int dr, int dc, double& d) {
    const int n = dr != 0 ? grid.rows() : grid.cols();
    const int pos = dr != 0 ? r : c;
    const int lo = pos == 0 ? 0 : -1;
    const int hi = pos == n - 1 ? 0 : 1;
    const int ra = r + lo * dr;
    const int ca = c + lo * dc;
    const int rb = r + hi * dr;
    const int cb = c + hi * dc;
    if (!grid.is_valid(ra, ca) || !grid.is_valid(rb, cb)) return false;
    d = (grid.height(rb, cb) - grid.height(ra, ca)) / (static_cast<double>(hi - lo) * res);
    return true;
  };
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      if (!grid.is_valid(r, c)) continue;
      double gx = 0.0;
      double gy = 0.0;
      if (!diff(r, c, 0, 1, gx) || !diff(r, c, 1, 0, gy)) continue;
      out.set_height(r, c, std::hypot(gx, gy));
    }
  }
  return out;
}

std::string to_string(CorrelationMode mode) {
  return mode == CorrelationMode::kRaw ? "raw" : "ncc";
}

CorrelationMode parse_correlation_mode(const std::string& text) {
  if (text == "raw") return CorrelationMode::kRaw;
  if (text == "ncc") return CorrelationMode::kNormalized;
  throw ConfigError("unknown correlation mode '" + text + "' (expected raw or ncc)");
}

namespace {

struct OffsetScore {
  double score = 0.0;
  int count = 0;
};

OffsetScore score_offset(const ElevationGrid& L, const ElevationGrid& O, int i, int j,
                         CorrelationMode mode) {
  OffsetScore out;
  if (mode == CorrelationMode::kRaw) {
    double sum = 0.0;
    for (int a = 0; a < L.rows(); ++a) {
      for (int b = 0; b < L.cols(); ++b) {
        if (!L.is_valid(a, b) || !O.is_valid(i + a, j + b)) continue;
        sum += L.height(a, b) * O.height(i + a, j + b);
        ++out.count;
      }
    }
    out.score = out.count > 0 ? sum / out.count : 0.0;
    return out;
  }
  double sl = 0.0;
  double so = 0.0;
  for (int a = 0; a < L.rows(); ++a) {
    for (int b = 0; b < L.cols(); ++b) {
      if (!L.is_valid(a, b) || !O.is_valid(i + a, j + b)) continue;
      sl += L.height(a, b);
      so += O.height(i + a, j + b);
      ++out.count;
    }
  }
  if (out.count == 0) return out;
  const double ml = sl / out.count;
  const double mo = so / out.count;
  double slo = 0.0;
  double sll = 0.0;
  double soo = 0.0;
  for (int a = 0; a < L.rows(); ++a) {
    for (int b = 0; b < L.cols(); ++b) {
      if (!L.is_valid(a, b) || !O.is_valid(i + a, j + b)) continue;
      const double dl = L.height(a, b) - ml;
      const double d_o = O.height(i + a, j + b) - mo;
      slo += dl * d_o;
      sll += dl * dl;
      soo += d_o * d_o;
    }
  }
  const double denom = std::sqrt(sll * soo);
  out.score = denom > 0.0 ? slo / denom : 0.0;
  return out;
}

}  // namespace

MatchResult cross_correlate(const ElevationGrid& L, const ElevationGrid& O,
                            const MatchParams& params) {
  if (L.rows() > O.rows() || L.cols() > O.cols()) {
    throw ContractError("local grid does not fit inside the orbital grid");
  }
  MatchResult m;
  m.rows = O.rows() - L.rows() + 1;
  m.cols = O.cols() - L.cols() + 1;
  m.scores.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
  std::vector<int> counts(m.scores.size(), 0);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      const OffsetScore s = score_offset(L, O, i, j, params.mode);
      const std::size_t k = static_cast<std::size_t>(i) * m.cols + j;
      m.scores[k] = s.score;
      counts[k] = s.count;
    }
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < m.scores.size(); ++k) {
    if (m.scores[k] > m.scores[best]) best = k;
  }
  m.best_row = static_cast<int>(best / m.cols);
  m.best_col = static_cast<int>(best % m.cols);
  m.peak = m.scores[best];

  double second = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (std::max(std::abs(i - m.best_row), std::abs(j - m.best_col)) <= 1) continue;
      second = std::max(second, m.at(i, j));
    }
  }
  if (!(m.peak > 0.0)) {
    m.sharpness = 1.0;
  } else if (!(second > 0.0)) {
    m.sharpness = std::numeric_limits<double>::infinity();
  } else {
    m.sharpness = m.peak / second;
  }
  const double l_size = static_cast<double>(L.rows()) * L.cols();
  m.valid_fraction = counts[best] / l_size;
  m.accepted = m.peak > 0.0 && m.sharpness >= params.min_sharpness &&
               m.valid_fraction >= params.min_valid_fraction;
  return m;
}

Correction apply_correction(const MatchResult& match, const RoverPose& estimate,
                            const ElevationGrid& orbital, const Eigen::Vector2d& local_anchor,
                            double gate) {
  Correction out;
  out.pose = estimate;
  if (!match.accepted) {
    out.diagnostic = "match not accepted";
    return out;
  }
  out.offset = orbital.world_of({match.best_row, match.best_col}) - local_anchor;
  if (out.offset.norm() > gate) {
    out.gated = true;
    std::ostringstream msg;
    msg << "correction of " << out.offset.norm() << " m exceeds gate " << gate << " m";
    out.diagnostic = msg.str();
    return out;
  }
  out.pose.x += out.offset.x();
  out.pose.y += out.offset.y();
  out.applied = true;
  return out;
}

std::optional<ElevationGrid> crop_to_valid(const ElevationGrid& grid) {
  int r0 = grid.rows();
  int r1 = -1;
  int c0 = grid.cols();
  int c1 = -1;
  for (int r = 0; r < grid.rows(); ++r) {
    for (int c = 0; c < grid.cols(); ++c) {
      if (!grid.is_valid(r, c)) continue;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) return std::nullopt;
  GridGeometry g = grid.geometry();
  g.origin = grid.world_of({r0, c0});
  g.rows = r1 - r0 + 1;
  g.cols = c1 - c0 + 1;
  ElevationGrid out(g, 0.0, false);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (grid.is_valid(r0 + r, c0 + c)) out.set_height(r, c, grid.height(r0 + r, c0 + c));
    }
  }
  return out;
}

GlobalCorrectionOutcome run_global_correction(const LocalRollingMap& map,
                                              const ElevationGrid& orbital,
                                              const RoverPose& estimate,
                                              const GlobalCorrectionParams& params) {
  GlobalCorrectionOutcome out;
  out.correction.pose = estimate;
  out.relief_variance = map.relief_variance();
  if (out.relief_variance < params.min_relief_variance) {
    out.correction.diagnostic = "relief below trigger";
    return out;
  }
  out.triggered = true;
  const ElevationGrid coarse = downsample_local(map, orbital.resolution(), orbital.origin());
  const auto grad = crop_to_valid(gradient_magnitude(coarse));
  if (!grad || grad->rows() < 3 || grad->cols() < 3 || grad->rows() > orbital.rows() ||
      grad->cols() > orbital.cols()) {
    out.correction.diagnostic = "local gradient window unusable";
    return out;
  }
  const ElevationGrid orbital_grad = gradient_magnitude(orbital);
  out.match = cross_correlate(*grad, orbital_grad, params.match);
  out.correction =
      apply_correction(*out.match, estimate, orbital, grad->origin(), params.gate);
  return out;
}

void write_match_csv(std::ostream& out, const MatchResult& match) {
  for (int i = 0; i < match.rows; ++i) {
    for (int j = 0; j < match.cols; ++j) {
      if (j > 0) out << ',';
      out << format_double(match.at(i, j));
    }
    out << '\n';
  }
}

void write_match_csv(const std::filesystem::path& path, const MatchResult& match) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_match_csv(out, match);
}

std::string match_summary(const MatchResult& match) {
  std::ostringstream s;
  s << "match offset=(" << match.best_row << "," << match.best_col
    << ") score=" << format_double(match.peak) << " sharpness=" << format_double(match.sharpness)
    << " valid_fraction=" << format_double(match.valid_fraction)
    << " accepted=" << (match.accepted ? "true" : "false");
  return s.str();
}

}  // namespace rover_gnc
