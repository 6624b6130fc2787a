#pragma once

// Brute-force reference implementations used as test oracles. They favour
// directness over speed and share no code with the library beyond its types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "fovs/geometry.hpp"
#include "fovs/metrics.hpp"
#include "fovs/voxel.hpp"

namespace fovs::oracle {

/// Mean distance to the k nearest other points: all pairwise squared
/// distances, the k smallest sorted ascending, square roots summed in order.
inline std::vector<double> knn_means(const std::vector<Vec3>& pts, int k) {
  const std::size_t n = pts.size();
  const auto ku = static_cast<std::size_t>(k);
  std::vector<double> out(n);
  std::vector<double> d2;
  for (std::size_t i = 0; i < n; ++i) {
    d2.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = pts[j].x() - pts[i].x();
      const double dy = pts[j].y() - pts[i].y();
      const double dz = pts[j].z() - pts[i].z();
      d2.push_back(dx * dx + dy * dy + dz * dz);
    }
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(ku) - 1, d2.end());
    std::sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(ku));
    double s = 0.0;
    for (std::size_t m = 0; m < ku; ++m) s += std::sqrt(d2[m]);
    out[i] = s / k;
  }
  return out;
}

inline std::vector<Keypoint> filter_outliers(const std::vector<Keypoint>& pts, const SpanConfig& cfg) {
  const int k = cfg.outlier_neighbors;
  if (pts.size() <= static_cast<std::size_t>(k)) return pts;
  std::vector<Vec3> pos;
  for (const auto& p : pts) pos.push_back(p.position);
  const auto means = knn_means(pos, k);
  const double n = static_cast<double>(means.size());
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= n;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  const double threshold = mean + cfg.outlier_std_ratio * std::sqrt(var / n) + 1e-9 * mean;
  std::vector<Keypoint> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (means[i] <= threshold) kept.push_back(pts[i]);
  }
  return kept;
}

inline std::vector<Keypoint> select_observed(const std::vector<Keypoint>& pts, const Pose& pose, double t,
                                             const SpanConfig& cfg) {
  const double q = cfg.frame_quantum_s;
  const auto frame = std::llround(t / q);
  const double half = cfg.cube_length_m / 2.0;
  std::vector<Keypoint> cand;
  for (const auto& p : pts) {
    if (std::llround(p.observed_at / q) != frame) continue;
    bool inside = true;
    for (int a = 0; a < 3; ++a) inside = inside && std::abs(p.position[a] - pose.translation[a]) < half;
    if (inside) cand.push_back(p);
  }
  return cfg.outlier_filter ? filter_outliers(cand, cfg) : cand;
}

/// Direction test in the local frame: cos(angle to axis) > cos(theta).
inline bool in_cone(const Pose& pose, const Vec3& world, const Vec3& axis, double theta_deg) {
  const Vec3 local = pose.rotation.conjugate() * (world - pose.translation);
  const double n = local.norm();
  if (n == 0.0) return false;
  return local.dot(axis) / (n * axis.norm()) > std::cos(theta_deg * std::numbers::pi / 180.0);
}

inline std::vector<Keypoint> classify_span(const std::vector<Keypoint>& pts, const Pose& pose, const Vec3& axis,
                                           double theta_deg) {
  std::vector<Keypoint> out;
  for (const auto& p : pts) {
    if (in_cone(pose, p.position, axis, theta_deg)) out.push_back(p);
  }
  return out;
}

/// Cell of p along each axis by testing every interval [i, i+1) of the
/// scaled coordinate instead of flooring it.
inline std::optional<std::size_t> cell_of(const Vec3& p, const Vec3& anchor, double d, int r) {
  std::size_t idx[3];
  for (int a = 0; a < 3; ++a) {
    const double u = ((p[a] - anchor[a]) + d / 2.0) * (r / d);
    bool found = false;
    for (int i = 0; i < r; ++i) {
      if (static_cast<double>(i) <= u && u < static_cast<double>(i + 1)) {
        idx[a] = static_cast<std::size_t>(i);
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  const auto ru = static_cast<std::size_t>(r);
  return (idx[0] * ru + idx[1]) * ru + idx[2];
}

/// Set-cell list (ascending) of the grid holding `pts`.
inline std::vector<std::size_t> voxel_cells(const std::vector<Keypoint>& pts, const Vec3& anchor,
                                            const SpanConfig& cfg) {
  std::vector<std::size_t> cells;
  for (const auto& p : pts) {
    if (auto c = cell_of(p.position, anchor, cfg.cube_length_m, cfg.resolution)) cells.push_back(*c);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

/// Distances in cm over all pairs of set cell centres.
inline std::optional<DistanceStats> distance_stats(const OccupancyGrid& a, const OccupancyGrid& b) {
  const auto ca = a.set_cells();
  const auto cb = b.set_cells();
  if (ca.empty() || cb.empty()) return std::nullopt;
  const auto centre = [](const OccupancyGrid& g, std::size_t c) {
    const auto ijk = g.cell_of(c);
    return g.cell_center(ijk[0], ijk[1], ijk[2]);
  };
  DistanceStats s;
  s.min = std::numeric_limits<double>::infinity();
  double hausdorff = 0.0;
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t x : ca) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t y : cb) nearest = std::min(nearest, (centre(a, x) - centre(b, y)).norm());
    s.min = std::min(s.min, nearest);
    hausdorff = std::max(hausdorff, nearest);
    sum_a += nearest;
  }
  for (std::size_t y : cb) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t x : ca) nearest = std::min(nearest, (centre(a, x) - centre(b, y)).norm());
    hausdorff = std::max(hausdorff, nearest);
    sum_b += nearest;
  }
  s.avg = 0.5 * (sum_a / static_cast<double>(ca.size()) + sum_b / static_cast<double>(cb.size()));
  s.max = hausdorff;
  s.min *= 100.0;
  s.avg *= 100.0;
  s.max *= 100.0;
  return s;
}

}  // namespace fovs::oracle
