#include "rover_gnc/hazard_detector.hpp"

#include "rover_gnc/dem_io.hpp"
#include "rover_gnc/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace rover_gnc {

namespace {

void fill_thresholds(CalibrationTable& t) {
  const std::size_t n = t.d_cal.size();
  t.d_min.resize(n);
  t.d_max.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    t.d_min[k] = min_tolerated_distance(t.d_cal[k], t.h_cam, t.t_near);
    t.d_max[k] = max_tolerated_distance(t.d_cal[k], t.h_cam, t.t_far);
  }
}

void check_tolerances(double h_cam, double t_near, double t_far) {
  if (!(h_cam > 0.0)) throw ConfigError("camera height must be positive");
  if (!(t_near >= 0.0) || !(t_far >= 0.0)) {
    throw ConfigError("hazard tolerances must be non-negative");
  }
  if (t_near >= h_cam) throw ConfigError("T_near must be smaller than the camera height");
}

}  // namespace

CalibrationTable calibrate(const DepthFrame& flat_frame, double h_cam, double t_near,
                           double t_far, const std::array<CornerPair, 4>& corners) {
  check_tolerances(h_cam, t_near, t_far);
  CalibrationTable t;
  t.rows = flat_frame.rows;
  t.cols = flat_frame.cols;
  t.h_cam = h_cam;
  t.t_near = t_near;
  t.t_far = t_far;
  t.corners = corners;
  for (std::size_t k = 0; k < flat_frame.distance.size(); ++k) {
    if (!flat_frame.valid[k] || !(flat_frame.distance[k] > 0.0)) {
      throw CalibrationError("calibration frame has an invalid pixel at index " +
                             std::to_string(k));
    }
  }
  t.d_cal = flat_frame.distance;
  fill_thresholds(t);
  return t;
}

void save_calibration(std::ostream& out, const CalibrationTable& t) {
  out << "# hazard detector calibration\n"
      << "rows " << t.rows << '\n'
      << "cols " << t.cols << '\n'
      << "h_cam " << format_double(t.h_cam) << '\n'
      << "t_near " << format_double(t.t_near) << '\n'
      << "t_far " << format_double(t.t_far) << '\n';
  for (const auto& [px, rover] : t.corners) {
    out << "corner " << format_double(px.x()) << ' ' << format_double(px.y()) << ' '
        << format_double(rover.x()) << ' ' << format_double(rover.y()) << '\n';
  }
  out << "d_cal\n";
  for (int r = 0; r < t.rows; ++r) {
    for (int c = 0; c < t.cols; ++c) {
      if (c > 0) out << ' ';
      out << format_double(t.d_cal[t.index(r, c)]);
    }
    out << '\n';
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_calibration(out, table);
}

CalibrationTable load_calibration(std::istream& in) {
  CalibrationTable t;
  std::string line;
  int corner = 0;
  bool body = false;
  while (!body && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "rows") {
      ls >> t.rows;
    } else if (key == "cols") {
      ls >> t.cols;
    } else if (key == "h_cam") {
      ls >> t.h_cam;
    } else if (key == "t_near") {
      ls >> t.t_near;
    } else if (key == "t_far") {
      ls >> t.t_far;
    } else if (key == "corner") {
      if (corner >= 4) throw IoError("calibration file has more than four corners");
      auto& [px, rover] = t.corners[corner++];
      ls >> px.x() >> px.y() >> rover.x() >> rover.y();
    } else if (key == "d_cal") {
      body = true;
      continue;
    } else {
      throw IoError("unknown calibration key '" + key + "'");
    }
    if (!ls) throw IoError("malformed calibration entry '" + line + "'");
  }
  if (!body || corner != 4 || t.rows < 1 || t.cols < 1) {
    throw IoError("incomplete calibration file");
  }
  check_tolerances(t.h_cam, t.t_near, t.t_far);
  t.d_cal.resize(std::size_t(t.rows) * t.cols);
  for (double& d : t.d_cal) {
    if (!(in >> d)) throw IoError("calibration distance table truncated");
  }
  fill_thresholds(t);
  return t;
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_calibration(in);
}

std::size_t HazardMask::count(PixelClass cls) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), cls));
}

HazardMask detect(const DepthFrame& frame, const CalibrationTable& table, int min_cluster) {
  if (frame.rows != table.rows || frame.cols != table.cols) {
    throw ContractError("depth frame shape does not match the calibration table");
  }
  HazardMask mask;
  mask.rows = frame.rows;
  mask.cols = frame.cols;
  mask.cells.assign(frame.distance.size(), PixelClass::kFree);
  for (std::size_t k = 0; k < frame.distance.size(); ++k) {
    if (!frame.valid[k]) {
      mask.cells[k] = PixelClass::kInvalid;
    } else if (frame.distance[k] < table.d_min[k]) {
      mask.cells[k] = PixelClass::kPositive;
    } else if (frame.distance[k] > table.d_max[k]) {
      mask.cells[k] = PixelClass::kNegative;
    }
  }
  if (min_cluster <= 1) return mask;

  // 8-connected components per hazard class; small ones are noise.
  std::vector<std::uint8_t> seen(mask.cells.size(), 0);
  std::vector<std::size_t> component;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.cells.size(); ++start) {
    const PixelClass cls = mask.cells[start];
    if (seen[start] || (cls != PixelClass::kPositive && cls != PixelClass::kNegative)) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      component.push_back(k);
      const int r = static_cast<int>(k / mask.cols);
      const int c = static_cast<int>(k % mask.cols);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= mask.rows || cc < 0 || cc >= mask.cols) continue;
          const std::size_t n = std::size_t(rr) * mask.cols + cc;
          if (seen[n] || mask.cells[n] != cls) continue;
          seen[n] = 1;
          stack.push_back(n);
        }
      }
    }
    if (static_cast<int>(component.size()) < min_cluster) {
      for (std::size_t k : component) mask.cells[k] = PixelClass::kFree;
    }
  }
  return mask;
}

Eigen::Vector2d PerspectiveTransform::apply(const Eigen::Vector2d& pixel) const {
  const Eigen::Vector3d q = h_ * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  return q.head<2>() / q.z();
}

namespace {

bool any_three_collinear(const std::array<Eigen::Vector2d, 4>& pts) {
  double scale = 0.0;
  for (const auto& a : pts) {
    for (const auto& b : pts) scale = std::max(scale, (a - b).squaredNorm());
  }
  if (scale == 0.0) return true;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        const Eigen::Vector2d u = pts[j] - pts[i];
        const Eigen::Vector2d v = pts[k] - pts[i];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-9 * scale) return true;
      }
    }
  }
  return false;
}

}  // namespace

PerspectiveTransform fit_perspective(const std::array<CornerPair, 4>& pairs) {
  std::array<Eigen::Vector2d, 4> src;
  std::array<Eigen::Vector2d, 4> dst;
  for (int i = 0; i < 4; ++i) {
    src[i] = pairs[i].first;
    dst[i] = pairs[i].second;
  }
  if (any_three_collinear(src) || any_three_collinear(dst)) {
    throw SingularGeometryError("three perspective correspondences are collinear");
  }
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double u = src[i].x();
    const double v = src[i].y();
    const double x = dst[i].x();
    const double y = dst[i].y();
    a.row(2 * i) << u, v, 1, 0, 0, 0, -u * x, -v * x;
    a.row(2 * i + 1) << 0, 0, 0, u, v, 1, -u * y, -v * y;
    b(2 * i) = x;
    b(2 * i + 1) = y;
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  if (!lu.isInvertible()) throw SingularGeometryError("degenerate perspective system");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return PerspectiveTransform(m);
}

TraversabilityGrid::TraversabilityGrid(const GridGeometry& geometry, GridFrame frame)
    : geometry_(geometry), frame_(frame), cells_(geometry.size(), 0) {
  if (!(geometry.resolution > 0.0) || geometry.rows < 1 || geometry.cols < 1) {
    throw ConfigError("traversability grid needs positive resolution and size");
  }
}

std::size_t TraversabilityGrid::hazard_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

void TraversabilityGrid::merge(const TraversabilityGrid& other) {
  const GridGeometry& g = other.geometry();
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (!other.is_hazard(r, c)) continue;
      const auto idx = geometry_.grid_of(g.world_of({r, c}));
      if (idx) set(idx->row, idx->col, true);
    }
  }
}

void TraversabilityGrid::clear_disc(const Eigen::Vector2d& p, double radius) {
  const GridIndex lo = geometry_.nearest(p - Eigen::Vector2d::Constant(radius));
  const GridIndex hi = geometry_.nearest(p + Eigen::Vector2d::Constant(radius));
  for (int r = std::max(lo.row, 0); r <= std::min(hi.row, geometry_.rows - 1); ++r) {
    for (int c = std::max(lo.col, 0); c <= std::min(hi.col, geometry_.cols - 1); ++c) {
      if ((geometry_.world_of({r, c}) - p).norm() <= radius) set(r, c, false);
    }
  }
}

void TraversabilityGrid::dilate(double margin) {
  const int n = static_cast<int>(std::ceil(margin / geometry_.resolution - 1e-9));
  if (n <= 0) return;
  std::vector<std::pair<int, int>> element;
  for (int dr = -n; dr <= n; ++dr) {
    for (int dc = -n; dc <= n; ++dc) {
      if (dr * dr + dc * dc <= n * n) element.emplace_back(dr, dc);
    }
  }
  const std::vector<std::uint8_t> src = cells_;
  for (int r = 0; r < geometry_.rows; ++r) {
    for (int c = 0; c < geometry_.cols; ++c) {
      if (!src[geometry_.flat(r, c)]) continue;
      for (const auto& [dr, dc] : element) {
        if (geometry_.contains(r + dr, c + dc)) set(r + dr, c + dc, true);
      }
    }
  }
}

TraversabilityGrid project_hazards(const HazardMask& mask, const PerspectiveTransform& tf,
                                   const std::optional<RoverPose>& pose, double safety_margin,
                                   double resolution) {
  if (!(resolution > 0.0)) throw ConfigError("traversability resolution must be positive");
  auto to_frame = [&](const Eigen::Vector2d& rover_xy) -> Eigen::Vector2d {
    if (!pose) return rover_xy;
    const double c = std::cos(pose->heading);
    const double s = std::sin(pose->heading);
    return {pose->x + c * rover_xy.x() - s * rover_xy.y(),
            pose->y + s * rover_xy.x() + c * rover_xy.y()};
  };

  // Grid extent: projected RoI footprint plus the margin.
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  const double r1 = std::max(mask.rows - 1, 0);
  const double c1 = std::max(mask.cols - 1, 0);
  for (const Eigen::Vector2d& px : {Eigen::Vector2d(0, 0), Eigen::Vector2d(c1, 0),
                                   Eigen::Vector2d(c1, r1), Eigen::Vector2d(0, r1)}) {
    const Eigen::Vector2d w = to_frame(tf.apply(px));
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  const double pad = safety_margin + 2.0 * resolution;
  GridGeometry geom;
  geom.resolution = resolution;
  geom.origin = ((lo.array() - pad) / resolution).floor() * resolution;
  const Eigen::Vector2d span = hi - geom.origin + Eigen::Vector2d::Constant(pad);
  geom.cols = static_cast<int>(std::ceil(span.x() / resolution)) + 1;
  geom.rows = static_cast<int>(std::ceil(span.y() / resolution)) + 1;

  TraversabilityGrid grid(geom, pose ? GridFrame::kWorld : GridFrame::kRover);
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      const PixelClass cls = mask.at(r, c);
      if (cls != PixelClass::kPositive && cls != PixelClass::kNegative) continue;
      const auto idx = geom.grid_of(to_frame(tf.apply(Eigen::Vector2d(c, r))));
      if (idx) grid.set(idx->row, idx->col, true);
    }
  }
  grid.dilate(safety_margin);
  return grid;
}

}  // namespace rover_gnc
