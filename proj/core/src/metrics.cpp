#include "fovs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fovs {

GridScores grid_metrics(const OccupancyGrid& pred, const OccupancyGrid& truth) {
  pred.require_same_geometry(truth);
  const auto tp = static_cast<double>(grid_overlap(pred, truth));
  const auto np = static_cast<double>(pred.count());
  const auto nt = static_cast<double>(truth.count());
  GridScores s;
  if (np == 0.0 && nt == 0.0) {
    s.iou = s.f1 = s.precision = s.recall = 1.0;
    s.both_empty = true;
    return s;
  }
  const double uni = np + nt - tp;
  s.iou = uni > 0.0 ? tp / uni : 0.0;
  s.precision = np > 0.0 ? tp / np : 0.0;
  s.recall = nt > 0.0 ? tp / nt : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

namespace {

// Squared cell-index distance from every cell of `from` to its nearest cell of `to`.
std::vector<double> nearest_squared(const std::vector<std::array<int, 3>>& from,
                                    const std::vector<std::array<int, 3>>& to) {
  std::vector<double> out(from.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < from.size(); ++i) {
    for (const auto& b : to) {
      const double dx = from[i][0] - b[0];
      const double dy = from[i][1] - b[1];
      const double dz = from[i][2] - b[2];
      out[i] = std::min(out[i], dx * dx + dy * dy + dz * dz);
    }
  }
  return out;
}

std::vector<std::array<int, 3>> cells_of(const OccupancyGrid& g) {
  std::vector<std::array<int, 3>> out;
  for (auto c : g.set_cells()) out.push_back(g.cell_of(c));
  return out;
}

}  // namespace

std::optional<DistanceStats> foveal_distance_stats(const OccupancyGrid& pred, const OccupancyGrid& truth) {
  pred.require_same_geometry(truth);
  const auto a = cells_of(pred);
  const auto b = cells_of(truth);
  if (a.empty() || b.empty()) return std::nullopt;
  const auto ab = nearest_squared(a, b);
  const auto ba = nearest_squared(b, a);
  const double cm = 100.0 * pred.cell_edge();
  auto mean_sqrt = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::sqrt(x);
    return s / static_cast<double>(v.size());
  };
  DistanceStats d;
  d.min = std::sqrt(*std::min_element(ab.begin(), ab.end())) * cm;
  d.avg = 0.5 * (mean_sqrt(ab) + mean_sqrt(ba)) * cm;
  d.max = std::sqrt(std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()))) * cm;
  return d;
}

}  // namespace fovs
