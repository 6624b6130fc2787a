#pragma once

#include <optional>

#include "fovs/voxel.hpp"

namespace fovs {

struct GridScores {
  double iou = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Both grids empty: scored as iou = f1 = precision = recall = 1.
  bool both_empty = false;
};

/// Set metrics from popcounts. Throws GeometryMismatch on differing geometry.
GridScores grid_metrics(const OccupancyGrid& pred, const OccupancyGrid& truth);

/// Distances in centimetres between set cell centres.
struct DistanceStats {
  double min = 0.0;  // closest pair
  double avg = 0.0;  // symmetric Chamfer: mean of both directed mean-NN distances
  double max = 0.0;  // symmetric Hausdorff
};

/// nullopt when either grid is empty.
std::optional<DistanceStats> foveal_distance_stats(const OccupancyGrid& pred, const OccupancyGrid& truth);

}  // namespace fovs
