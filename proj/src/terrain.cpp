#include "rover_gnc/terrain.hpp"

#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace rover_gnc {

ElevationGrid::ElevationGrid(const GridGeometry& geometry, double fill, bool valid)
    : geometry_(geometry) {
  if (!(geometry.resolution > 0.0) || !std::isfinite(geometry.resolution)) {
    throw ConfigError("grid resolution must be positive");
  }
  if (geometry.rows < 1 || geometry.cols < 1) {
    throw ConfigError("grid must have at least one row and one column");
  }
  heights_.assign(geometry.size(), fill);
  valid_.assign(geometry.size(), valid ? 1 : 0);
}

std::size_t ElevationGrid::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

double ElevationGrid::mean_valid_height() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < heights_.size(); ++k) {
    if (valid_[k]) {
      sum += heights_[k];
      ++n;
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

namespace {

enum class SampleStatus { kOk, kOutOfBounds, kUnknown };

SampleStatus bilinear(const ElevationGrid& grid, const Eigen::Vector2d& p, double& out) {
  const GridGeometry& g = grid.geometry();
  if (!g.in_center_hull(p)) return SampleStatus::kOutOfBounds;
  const double fx = std::clamp((p.x() - g.origin.x()) / g.resolution, 0.0,
                               static_cast<double>(g.cols - 1));
  const double fy = std::clamp((p.y() - g.origin.y()) / g.resolution, 0.0,
                               static_cast<double>(g.rows - 1));
  const int c0 = std::min(static_cast<int>(fx), std::max(g.cols - 2, 0));
  const int r0 = std::min(static_cast<int>(fy), std::max(g.rows - 2, 0));
  const double tx = g.cols > 1 ? fx - c0 : 0.0;
  const double ty = g.rows > 1 ? fy - r0 : 0.0;
  const int c1 = std::min(c0 + 1, g.cols - 1);
  const int r1 = std::min(r0 + 1, g.rows - 1);

  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  const int rr[4] = {r0, r0, r1, r1};
  const int cc[4] = {c0, c1, c0, c1};
  double h = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    if (!grid.is_valid(rr[k], cc[k])) return SampleStatus::kUnknown;
    h += w[k] * grid.height(rr[k], cc[k]);
  }
  out = h;
  return SampleStatus::kOk;
}

// Lattice value in [-1, 1] for value noise, hashed from its coordinates.
double lattice_value(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
  std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(octave));
  h = mix_seed(h, static_cast<std::uint64_t>(ix) * 0x100000001b3ULL);
  h = mix_seed(h, static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, int octave, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = fade(x - fx);
  const double ty = fade(y - fy);
  const double v00 = lattice_value(seed, octave, ix, iy);
  const double v10 = lattice_value(seed, octave, ix + 1, iy);
  const double v01 = lattice_value(seed, octave, ix, iy + 1);
  const double v11 = lattice_value(seed, octave, ix + 1, iy + 1);
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

void check_spec(const TerrainSpec& spec) {
  if (!(spec.width > 0.0) || !(spec.length > 0.0)) {
    throw ConfigError("terrain extent must be positive");
  }
  if (!(spec.resolution > 0.0)) throw ConfigError("terrain resolution must be positive");
  if (!(spec.amplitude >= 0.0)) throw ConfigError("terrain amplitude must be non-negative");
  if (spec.octaves < 0 || spec.craters < 0 || spec.ripples < 0) {
    throw ConfigError("terrain feature counts must be non-negative");
  }
  if (spec.octaves > 0 && !(spec.base_wavelength > 0.0)) {
    throw ConfigError("terrain base wavelength must be positive");
  }
}

}  // namespace

std::optional<double> ElevationGrid::try_height_at(const Eigen::Vector2d& p) const {
  double h = 0.0;
  if (bilinear(*this, p, h) != SampleStatus::kOk) return std::nullopt;
  return h;
}

double sample_height(const ElevationGrid& grid, const Eigen::Vector2d& p) {
  double h = 0.0;
  switch (bilinear(grid, p, h)) {
    case SampleStatus::kOk:
      return h;
    case SampleStatus::kOutOfBounds:
      throw OutOfBoundsError("sample point outside grid extent");
    case SampleStatus::kUnknown:
      break;
  }
  throw UnknownCellError("sample point touches an unknown cell");
}

Eigen::Vector2d terrain_gradient(const ElevationGrid& grid, const Eigen::Vector2d& p,
                                 double step) {
  const GridGeometry& g = grid.geometry();
  const Eigen::Vector2d lo = g.origin;
  const Eigen::Vector2d hi = g.max_center();
  Eigen::Vector2d grad;
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::Vector2d a = p;
    Eigen::Vector2d b = p;
    a[axis] = std::max(p[axis] - step, lo[axis]);
    b[axis] = std::min(p[axis] + step, hi[axis]);
    const double span = b[axis] - a[axis];
    grad[axis] = span > 0.0 ? (sample_height(grid, b) - sample_height(grid, a)) / span : 0.0;
  }
  return grad;
}

ElevationGrid generate_terrain(std::uint64_t seed, const TerrainSpec& spec) {
  check_spec(spec);
  GridGeometry geom;
  geom.origin = spec.origin;
  geom.resolution = spec.resolution;
  geom.cols = std::max(1, static_cast<int>(std::lround(spec.width / spec.resolution)) + 1);
  geom.rows = std::max(1, static_cast<int>(std::lround(spec.length / spec.resolution)) + 1);

  std::vector<double> raw(geom.size(), 0.0);

  // Multi-octave value noise.
  double amp = 1.0;
  double wavelength = spec.base_wavelength;
  for (int o = 0; o < spec.octaves; ++o) {
    const double ox = lattice_value(seed, 1000 + o, 0, 0) * 1000.0;
    const double oy = lattice_value(seed, 2000 + o, 0, 0) * 1000.0;
    for (int r = 0; r < geom.rows; ++r) {
      for (int c = 0; c < geom.cols; ++c) {
        const Eigen::Vector2d w = geom.world_of({r, c});
        raw[geom.flat(r, c)] += amp * value_noise(seed, o, w.x() / wavelength + ox,
                                                  w.y() / wavelength + oy);
      }
    }
    amp *= spec.persistence;
    wavelength *= 0.5;
  }

  std::mt19937_64 rng(mix_seed(seed, 77));
  std::uniform_real_distribution<double> ux(spec.origin.x(), spec.origin.x() + spec.width);
  std::uniform_real_distribution<double> uy(spec.origin.y(), spec.origin.y() + spec.length);

  auto for_disc = [&](const Eigen::Vector2d& center, double radius, auto&& fn) {
    const GridIndex lo = geom.nearest(center - Eigen::Vector2d::Constant(radius));
    const GridIndex hi = geom.nearest(center + Eigen::Vector2d::Constant(radius));
    for (int r = std::max(lo.row, 0); r <= std::min(hi.row, geom.rows - 1); ++r) {
      for (int c = std::max(lo.col, 0); c <= std::min(hi.col, geom.cols - 1); ++c) {
        const double d = (geom.world_of({r, c}) - center).norm();
        if (d < radius) fn(raw[geom.flat(r, c)], d);
      }
    }
  };

  // Craters: parabolic bowl with a Gaussian rim.
  std::uniform_real_distribution<double> crater_radius(1.5, 4.0);
  for (int k = 0; k < spec.craters; ++k) {
    const Eigen::Vector2d center(ux(rng), uy(rng));
    const double radius = crater_radius(rng);
    const double rim_width = 0.25 * radius;
    for_disc(center, radius + 3.0 * rim_width, [&](double& h, double d) {
      if (d < radius) h -= 1.0 - (d / radius) * (d / radius);
      const double e = (d - radius) / rim_width;
      h += 0.35 * std::exp(-e * e);
    });
  }

  // Ripple fields: tapered sinusoids with a random crest direction.
  std::uniform_real_distribution<double> field_radius(4.0, 10.0);
  std::uniform_real_distribution<double> ripple_wavelength(1.5, 3.0);
  std::uniform_real_distribution<double> direction(0.0, kPi);
  for (int k = 0; k < spec.ripples; ++k) {
    const Eigen::Vector2d center(ux(rng), uy(rng));
    const double radius = field_radius(rng);
    const double lambda = ripple_wavelength(rng);
    const double theta = direction(rng);
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    const GridIndex lo = geom.nearest(center - Eigen::Vector2d::Constant(radius));
    const GridIndex hi = geom.nearest(center + Eigen::Vector2d::Constant(radius));
    for (int r = std::max(lo.row, 0); r <= std::min(hi.row, geom.rows - 1); ++r) {
      for (int c = std::max(lo.col, 0); c <= std::min(hi.col, geom.cols - 1); ++c) {
        const Eigen::Vector2d w = geom.world_of({r, c});
        const double d = (w - center).norm();
        if (d >= radius) continue;
        const double taper = 0.5 * (1.0 + std::cos(kPi * d / radius));
        raw[geom.flat(r, c)] += 0.3 * taper * std::sin(2.0 * kPi * dir.dot(w - center) / lambda);
      }
    }
  }

  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  const double scale = (peak > 0.0 && spec.amplitude > 0.0) ? spec.amplitude / peak : 0.0;

  ElevationGrid grid(geom, 0.0, true);
  for (int r = 0; r < geom.rows; ++r) {
    for (int c = 0; c < geom.cols; ++c) {
      double h = raw[geom.flat(r, c)] * scale;
      // Rounding in the rescale may overshoot the bound by one ulp.
      h = std::clamp(h, -spec.amplitude, spec.amplitude);
      grid.set_height(r, c, h);
    }
  }
  return grid;
}

double obstacle_profile(const ObstacleSpec& obstacle, double r) {
  if (r >= obstacle.radius) return 0.0;
  return obstacle.height * 0.5 * (1.0 + std::cos(kPi * r / obstacle.radius));
}

ElevationGrid place_obstacles(const ElevationGrid& grid,
                              const std::vector<ObstacleSpec>& obstacles) {
  const GridGeometry& g = grid.geometry();
  const Eigen::Vector2d half = Eigen::Vector2d::Constant(0.5 * g.resolution);
  const Eigen::Vector2d lo = g.origin - half;
  const Eigen::Vector2d hi = g.max_center() + half;
  for (const auto& ob : obstacles) {
    if (!(ob.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
    if (ob.height == 0.0 || !std::isfinite(ob.height)) {
      throw ConfigError("obstacle height must be non-zero");
    }
    if ((ob.center.array() < lo.array()).any() || (ob.center.array() > hi.array()).any()) {
      throw ConfigError("obstacle center outside terrain extent");
    }
  }

  std::vector<double> raise(g.size(), 0.0);
  std::vector<double> lower(g.size(), 0.0);
  std::vector<std::uint8_t> touched(g.size(), 0);
  for (const auto& ob : obstacles) {
    const Eigen::Vector2d ext = Eigen::Vector2d::Constant(ob.radius);
    const GridIndex a = g.nearest(ob.center - ext);
    const GridIndex b = g.nearest(ob.center + ext);
    for (int r = std::max(a.row, 0); r <= std::min(b.row, g.rows - 1); ++r) {
      for (int c = std::max(a.col, 0); c <= std::min(b.col, g.cols - 1); ++c) {
        const double d = (g.world_of({r, c}) - ob.center).norm();
        if (d >= ob.radius) continue;
        const std::size_t k = g.flat(r, c);
        const double v = obstacle_profile(ob, d);
        touched[k] = 1;
        if (v > 0.0) raise[k] = std::max(raise[k], v);
        if (v < 0.0) lower[k] = std::min(lower[k], v);
      }
    }
  }

  ElevationGrid out = grid;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const std::size_t k = g.flat(r, c);
      if (!touched[k] || !grid.is_valid(r, c)) continue;
      out.set_height(r, c, grid.height(r, c) + raise[k] + lower[k]);
    }
  }
  return out;
}

int resolution_ratio(double coarse, double fine) {
  if (!(coarse > 0.0) || !(fine > 0.0)) throw ConfigError("resolutions must be positive");
  const double ratio = coarse / fine;
  const long k = std::lround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-6) {
    throw ConfigError("resolution ratio " + std::to_string(ratio) +
                      " is not a positive integer");
  }
  return static_cast<int>(k);
}

ElevationGrid derive_orbital_map(const ElevationGrid& truth, double orbital_resolution) {
  const int k = resolution_ratio(orbital_resolution, truth.resolution());
  GridGeometry geom;
  geom.resolution = truth.resolution() * k;
  geom.rows = truth.rows() / k;
  geom.cols = truth.cols() / k;
  if (geom.rows < 1 || geom.cols < 1) {
    throw ConfigError("orbital resolution coarser than the terrain extent");
  }
  geom.origin = truth.origin() + Eigen::Vector2d::Constant(0.5 * (k - 1) * truth.resolution());

  ElevationGrid out(geom, 0.0, false);
  for (int r = 0; r < geom.rows; ++r) {
    for (int c = 0; c < geom.cols; ++c) {
      double sum = 0.0;
      int n = 0;
      for (int i = r * k; i < (r + 1) * k; ++i) {
        for (int j = c * k; j < (c + 1) * k; ++j) {
          if (!truth.is_valid(i, j)) continue;
          sum += truth.height(i, j);
          ++n;
        }
      }
      if (n > 0) out.set_height(r, c, sum / n);
    }
  }
  return out;
}

}  // namespace rover_gnc
