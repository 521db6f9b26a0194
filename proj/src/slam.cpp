#include "rover_gnc/slam.hpp"

#include "rover_gnc/dem_io.hpp"
#include "rover_gnc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rover_gnc {

LocalRollingMap::LocalRollingMap(const Eigen::Vector2d& center, int rows, int cols,
                                 double resolution, const Eigen::Vector2d& lattice_origin) {
  if (!(resolution > 0.0) || rows < 1 || cols < 1) {
    throw ConfigError("local map needs positive resolution and size");
  }
  geometry_.resolution = resolution;
  geometry_.rows = rows;
  geometry_.cols = cols;
  const Eigen::Vector2d half(0.5 * (cols - 1) * resolution, 0.5 * (rows - 1) * resolution);
  const Eigen::Vector2d raw_origin = center - half;
  geometry_.origin =
      lattice_origin + ((raw_origin - lattice_origin) / resolution).array().round().matrix() *
                           resolution;
  anchor_ = geometry_.origin + half;
  residual_ = center - anchor_;
  mean_.assign(geometry_.size(), 0.0);
  variance_.assign(geometry_.size(), 0.0);
  valid_.assign(geometry_.size(), 0);
}

void LocalRollingMap::set_cell(int row, int col, double mean, double variance) {
  const std::size_t k = geometry_.flat(row, col);
  mean_[k] = mean;
  variance_[k] = variance;
  valid_[k] = 1;
}

std::size_t LocalRollingMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

ElevationGrid LocalRollingMap::heights() const {
  ElevationGrid out(geometry_, 0.0, false);
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < cols(); ++c) {
      if (is_valid(r, c)) out.set_height(r, c, mean(r, c));
    }
  }
  return out;
}

ElevationGrid LocalRollingMap::variances() const {
  ElevationGrid out(geometry_, 0.0, false);
  for (int r = 0; r < rows(); ++r) {
    for (int c = 0; c < cols(); ++c) {
      if (is_valid(r, c)) out.set_height(r, c, variance(r, c));
    }
  }
  return out;
}

double LocalRollingMap::relief_variance() const {
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    if (!valid_[k]) continue;
    sum += mean_[k];
    sum2 += mean_[k] * mean_[k];
    ++n;
  }
  if (n < 2) return 0.0;
  const double m = sum / static_cast<double>(n);
  return std::max(0.0, sum2 / static_cast<double>(n) - m * m);
}

void LocalRollingMap::translate_frame(const Eigen::Vector2d& offset) {
  geometry_.origin += offset;
  anchor_ += offset;
}

void LocalRollingMap::shift_to(const Eigen::Vector2d& new_center) {
  const Eigen::Vector2d d = (new_center - anchor_) / geometry_.resolution;
  // Whole cells toward zero; the tolerance absorbs representation error in
  // offsets that are exact multiples of the resolution.
  auto whole = [](double v) {
    return static_cast<int>(v >= 0.0 ? std::floor(v + 1e-9) : std::ceil(v - 1e-9));
  };
  const int dc = whole(d.x());
  const int dr = whole(d.y());
  if (dc != 0 || dr != 0) {
    std::vector<double> mean(mean_.size(), 0.0);
    std::vector<double> var(variance_.size(), 0.0);
    std::vector<std::uint8_t> valid(valid_.size(), 0);
    for (int r = 0; r < rows(); ++r) {
      const int sr = r + dr;
      if (sr < 0 || sr >= rows()) continue;
      for (int c = 0; c < cols(); ++c) {
        const int sc = c + dc;
        if (sc < 0 || sc >= cols()) continue;
        const std::size_t from = geometry_.flat(sr, sc);
        const std::size_t to = geometry_.flat(r, c);
        mean[to] = mean_[from];
        var[to] = variance_[from];
        valid[to] = valid_[from];
      }
    }
    mean_.swap(mean);
    variance_.swap(var);
    valid_.swap(valid);
    const Eigen::Vector2d moved(dc * geometry_.resolution, dr * geometry_.resolution);
    geometry_.origin += moved;
    anchor_ += moved;
  }
  residual_ = new_center - anchor_;
}

GaussianCell fuse_gaussian(const GaussianCell& prior, const GaussianCell& obs) {
  const double s = prior.variance + obs.variance;
  return {(prior.mean * obs.variance + obs.mean * prior.variance) / s,
          prior.variance * obs.variance / s};
}

std::size_t fuse_observation(LocalRollingMap& map, std::span<const Eigen::Vector3d> cloud,
                             double sigma_z) {
  if (!(sigma_z > 0.0)) throw ConfigError("observation sigma must be positive");
  const GridGeometry& g = map.geometry();
  std::vector<double> sum(g.size(), 0.0);
  std::vector<int> count(g.size(), 0);
  for (const auto& p : cloud) {
    const auto idx = g.grid_of(p.head<2>());
    if (!idx) continue;
    const std::size_t k = g.flat(*idx);
    sum[k] += p.z();
    ++count[k];
  }
  std::size_t updated = 0;
  const double var_z = sigma_z * sigma_z;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const std::size_t k = g.flat(r, c);
      if (count[k] == 0) continue;
      const GaussianCell obs{sum[k] / count[k], var_z / count[k]};
      if (map.is_valid(r, c)) {
        const GaussianCell fused = fuse_gaussian({map.mean(r, c), map.variance(r, c)}, obs);
        map.set_cell(r, c, fused.mean, fused.variance);
      } else {
        map.set_cell(r, c, obs.mean, obs.variance);
      }
      ++updated;
    }
  }
  return updated;
}

void export_map(const LocalRollingMap& map, const std::filesystem::path& heights_path,
                const std::filesystem::path& variance_path) {
  write_esri_ascii(heights_path, map.heights());
  write_esri_ascii(variance_path, map.variances());
}

ParticleSet init_particles(const RoverPose& initial_pose, std::size_t n, double sigma_xy,
                           double sigma_heading, std::uint64_t seed, double resample_threshold) {
  if (n < 1) throw ConfigError("particle filter needs at least one particle");
  ParticleSet set;
  set.resample_threshold = resample_threshold;
  set.particles.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w = 1.0 / static_cast<double>(n);
  for (auto& p : set.particles) {
    const double nx = normal(rng);
    const double ny = normal(rng);
    const double nh = normal(rng);
    p.x = initial_pose.x + sigma_xy * nx;
    p.y = initial_pose.y + sigma_xy * ny;
    p.heading = normalize_angle(initial_pose.heading + sigma_heading * nh);
    p.weight = w;
    p.score = 1.0;
  }
  set.ess = static_cast<double>(n);
  return set;
}

void predict(ParticleSet& set, const OdometryDelta& odometry, const MotionNoise& noise,
             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : set.particles) {
    OdometryDelta d = odometry;
    const double nf = normal(rng);
    const double nl = normal(rng);
    const double nh = normal(rng);
    d.forward += noise.sigma_forward * nf;
    d.lateral += noise.sigma_lateral * nl;
    d.heading_change += noise.sigma_heading * nh;
    RoverPose pose;
    pose.x = p.x;
    pose.y = p.y;
    pose.heading = p.heading;
    pose = compose(pose, d);
    p.x = pose.x;
    p.y = pose.y;
    p.heading = pose.heading;
  }
}

double log_score_scan(const Particle& particle, std::span<const Eigen::Vector3d> cloud,
                      const LocalRollingMap& map, const ScanMatchParams& params) {
  const double c = std::cos(particle.heading);
  const double s = std::sin(particle.heading);
  double sse = 0.0;
  std::size_t m = 0;
  for (const auto& q : cloud) {
    const Eigen::Vector2d w(particle.x + c * q.x() - s * q.y(),
                            particle.y + s * q.x() + c * q.y());
    const auto h = map.height_at(w);
    if (!h) continue;
    const double e = q.z() + params.altitude - *h;
    sse += e * e;
    ++m;
  }
  if (m == 0) return -std::numeric_limits<double>::infinity();
  return -sse / (2.0 * params.sigma_z * params.sigma_z * static_cast<double>(m));
}

double score_scan(const Particle& particle, std::span<const Eigen::Vector3d> cloud,
                  const LocalRollingMap& map, const ScanMatchParams& params) {
  return std::max(std::exp(log_score_scan(particle, cloud, map, params)), kVetoScore);
}

double effective_sample_size(const ParticleSet& set) {
  double sum2 = 0.0;
  for (const auto& p : set.particles) sum2 += p.weight * p.weight;
  return sum2 > 0.0 ? 1.0 / sum2 : 0.0;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cumulative = weights.empty() ? 0.0 : weights[0] / total;
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double target = (u + static_cast<double>(k)) / static_cast<double>(n);
    // Zero-weight particles are never drawn, even for a target of exactly 0.
    while (i + 1 < n && (target > cumulative || weights[i] <= 0.0)) {
      ++i;
      cumulative += weights[i] / total;
    }
    out.push_back(i);
  }
  return out;
}

namespace {

void normalize_and_resample(ParticleSet& set, double total, std::uint64_t seed) {
  for (auto& p : set.particles) p.weight /= total;
  set.ess = effective_sample_size(set);

  const double n = static_cast<double>(set.size());
  if (set.ess >= set.resample_threshold * n) return;

  std::vector<double> weights(set.size());
  for (std::size_t k = 0; k < set.size(); ++k) weights[k] = set.particles[k].weight;
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto idx = systematic_resample(weights, u);
  std::vector<Particle> next;
  next.reserve(set.size());
  for (std::size_t k : idx) {
    Particle p = set.particles[k];
    p.weight = 1.0 / n;
    next.push_back(p);
  }
  set.particles.swap(next);
  set.ess = n;
}

}  // namespace

void update_weights_and_resample(ParticleSet& set, std::span<const double> scores,
                                 std::uint64_t seed) {
  if (scores.size() != set.size()) {
    throw ContractError("score count does not match particle count");
  }
  if (std::all_of(scores.begin(), scores.end(), [](double s) { return s <= kVetoScore; })) {
    throw FilterDivergenceError("every particle was vetoed by scan matching");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    set.particles[k].score = scores[k];
    set.particles[k].weight *= scores[k];
    total += set.particles[k].weight;
  }
  if (!(total > 0.0)) {
    // Product underflow: fall back to the scores alone.
    total = 0.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      set.particles[k].weight = scores[k];
      total += scores[k];
    }
  }
  normalize_and_resample(set, total, seed);
}

void update_weights_from_log_scores(ParticleSet& set, std::span<const double> log_scores,
                                    std::uint64_t seed) {
  if (log_scores.size() != set.size()) {
    throw ContractError("score count does not match particle count");
  }
  std::vector<double> log_w(set.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const double w = set.particles[k].weight;
    log_w[k] = w > 0.0 ? std::log(w) + log_scores[k] : -std::numeric_limits<double>::infinity();
    best = std::max(best, log_w[k]);
  }
  if (!std::isfinite(best)) {
    if (std::all_of(log_scores.begin(), log_scores.end(),
                    [](double l) { return !std::isfinite(l); })) {
      throw FilterDivergenceError("every particle was vetoed by scan matching");
    }
    // Every prior weight was zero: restart from the scores.
    for (std::size_t k = 0; k < set.size(); ++k) log_w[k] = log_scores[k];
    best = *std::max_element(log_w.begin(), log_w.end());
  }
  double total = 0.0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    set.particles[k].score = std::max(std::exp(log_scores[k]), kVetoScore);
    set.particles[k].weight = std::exp(log_w[k] - best);
    total += set.particles[k].weight;
  }
  normalize_and_resample(set, total, seed);
}

RoverPose estimate_pose(const ParticleSet& set, double top_fraction) {
  RoverPose out;
  if (set.particles.empty()) return out;
  const std::size_t n = set.size();
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(std::clamp(top_fraction, 0.0, 1.0) * n)), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Particle& pa = set.particles[a];
    const Particle& pb = set.particles[b];
    if (pa.weight != pb.weight) return pa.weight > pb.weight;
    return pa.score > pb.score;
  });
  double wsum = 0.0;
  for (std::size_t i = 0; i < k; ++i) wsum += set.particles[order[i]].weight;
  const bool uniform = !(wsum > 0.0);
  double x = 0.0;
  double y = 0.0;
  double sn = 0.0;
  double cs = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const Particle& p = set.particles[order[i]];
    const double w = uniform ? 1.0 / static_cast<double>(k) : p.weight / wsum;
    x += w * p.x;
    y += w * p.y;
    sn += w * std::sin(p.heading);
    cs += w * std::cos(p.heading);
  }
  out.x = x;
  out.y = y;
  out.heading = normalize_angle(std::atan2(sn, cs));
  return out;
}

}  // namespace rover_gnc
