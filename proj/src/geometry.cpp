#include "rover_gnc/geometry.hpp"

#include <algorithm>
#include <limits>

namespace rover_gnc {

double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

bool GridGeometry::in_center_hull(const Eigen::Vector2d& p, double slack) const {
  const Eigen::Vector2d f = (p - origin) / resolution;
  return f.x() >= -slack && f.y() >= -slack && f.x() <= cols - 1 + slack &&
         f.y() <= rows - 1 + slack;
}

Polyline::Polyline(std::vector<Eigen::Vector2d> points) : points_(std::move(points)) {
  cumulative_.reserve(points_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) s += (points_[i] - points_[i - 1]).norm();
    cumulative_.push_back(s);
  }
}

std::size_t Polyline::segment_at(double s) const {
  if (points_.size() < 2) return 0;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(i, points_.size() - 2);
}

Eigen::Vector2d Polyline::point_at(double s) const {
  if (points_.empty()) return Eigen::Vector2d::Zero();
  if (points_.size() == 1 || s <= 0.0) return points_.front();
  if (s >= length()) return points_.back();
  const std::size_t i = segment_at(s);
  const double seg = cumulative_[i + 1] - cumulative_[i];
  if (seg <= 0.0) return points_[i];
  const double t = (s - cumulative_[i]) / seg;
  return points_[i] + t * (points_[i + 1] - points_[i]);
}

Polyline::Projection Polyline::project(const Eigen::Vector2d& p, double s_min,
                                       double s_max) const {
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (points_.empty()) return best;
  if (points_.size() == 1) {
    best.point = points_.front();
    best.distance = (p - best.point).norm();
    return best;
  }
  s_min = std::clamp(s_min, 0.0, length());
  s_max = std::clamp(s_max, s_min, length());
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const double s0 = cumulative_[i];
    const double s1 = cumulative_[i + 1];
    if (s1 < s_min || s0 > s_max) continue;
    const Eigen::Vector2d a = points_[i];
    const Eigen::Vector2d ab = points_[i + 1] - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    const double seg = s1 - s0;
    double t_lo = seg > 0.0 ? (s_min - s0) / seg : 0.0;
    double t_hi = seg > 0.0 ? (s_max - s0) / seg : 1.0;
    t = std::clamp(t, std::max(0.0, t_lo), std::min(1.0, t_hi));
    const Eigen::Vector2d q = a + t * ab;
    const double d = (p - q).norm();
    if (d < best.distance) {
      best.distance = d;
      best.point = q;
      best.arclength = s0 + t * seg;
    }
  }
  return best;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rover_gnc
