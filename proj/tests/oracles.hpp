#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner.

#include "rover_gnc/terrain.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <vector>

namespace rover_gnc::oracle {

/// Ray geometry: a camera `h_cam` above flat ground looks down at
/// `depression` radians towards `azimuth`. Returns the flat-ground distance
/// along the ray and the distance at which the same ray crosses height `t`.
struct RayCrossing {
  double d_ground;
  double d_at_height;
};

inline RayCrossing ray_crossing(double h_cam, double depression, double azimuth, double t) {
  const Eigen::Vector3d cam(0.3, -0.2, h_cam);
  const Eigen::Vector3d dir(std::cos(depression) * std::cos(azimuth),
                            std::cos(depression) * std::sin(azimuth), -std::sin(depression));
  const double to_ground = -cam.z() / dir.z();
  const double to_t = (t - cam.z()) / dir.z();
  const Eigen::Vector3d ground = cam + to_ground * dir;
  const Eigen::Vector3d at_t = cam + to_t * dir;
  return {(ground - cam).norm(), (at_t - cam).norm()};
}

/// Raw sliding-window score: mean product over pixels valid in both.
inline double raw_score(const ElevationGrid& L, const ElevationGrid& O, int i, int j) {
  double s = 0.0;
  int n = 0;
  for (int a = 0; a < L.rows(); ++a) {
    for (int b = 0; b < L.cols(); ++b) {
      if (L.is_valid(a, b) && O.is_valid(i + a, j + b)) {
        s += L.height(a, b) * O.height(i + a, j + b);
        ++n;
      }
    }
  }
  return n ? s / n : 0.0;
}

/// Zero-mean normalized score over pixels valid in both (two-pass).
inline double ncc_score(const ElevationGrid& L, const ElevationGrid& O, int i, int j) {
  std::vector<double> x, y;
  for (int a = 0; a < L.rows(); ++a) {
    for (int b = 0; b < L.cols(); ++b) {
      if (L.is_valid(a, b) && O.is_valid(i + a, j + b)) {
        x.push_back(L.height(a, b));
        y.push_back(O.height(i + a, j + b));
      }
    }
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k] / n;
    my += y[k] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxx * syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

/// First maximum in row-major order of the brute-force raw score.
inline std::pair<int, int> raw_argmax(const ElevationGrid& L, const ElevationGrid& O) {
  std::pair<int, int> best{0, 0};
  double top = -INFINITY;
  for (int i = 0; i + L.rows() <= O.rows(); ++i) {
    for (int j = 0; j + L.cols() <= O.cols(); ++j) {
      const double v = raw_score(L, O, i, j);
      if (v > top) {
        top = v;
        best = {i, j};
      }
    }
  }
  return best;
}

inline ElevationGrid square_grid(int n, double res) {
  GridGeometry g;
  g.rows = g.cols = n;
  g.resolution = res;
  return ElevationGrid(g);
}

/// Random elevations quantized to 1/1024 m so that adding a dyadic constant
/// is exact in binary.
inline ElevationGrid quantized_random_map(int n, std::mt19937_64& rng) {
  ElevationGrid out = square_grid(n, 0.5);
  std::uniform_int_distribution<int> q(-1024, 1024);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out.set_height(r, c, q(rng) / 1024.0);
  return out;
}

inline ElevationGrid crop(const ElevationGrid& src, int r0, int c0, int rows, int cols) {
  GridGeometry g = src.geometry();
  g.rows = rows;
  g.cols = cols;
  g.origin = src.world_of({r0, c0});
  ElevationGrid out(g, 0.0, false);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (src.is_valid(r0 + r, c0 + c)) out.set_height(r, c, src.height(r0 + r, c0 + c));
  return out;
}

inline ElevationGrid add_constant(ElevationGrid g, double k) {
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c)
      if (g.is_valid(r, c)) g.set_height(r, c, g.height(r, c) + k);
  return g;
}

}  // namespace rover_gnc::oracle
