#pragma once

#include <optional>
#include <vector>

#include "fovs/forecaster.hpp"

namespace fovs {

using Pixel = Eigen::Vector2d;

/// Pinhole camera in the local head frame (x right, y down, z forward).
struct CameraModel {
  double focal_px = 160.0;
  Pixel principal_point_px{160.0, 160.0};
  Pixel image_size_px{320.0, 320.0};

  void validate() const;
  /// Pixel radius subtending `degrees` at the principal point.
  double radius_for_degrees(double degrees) const;
};

/// Projects a local-frame point; nullopt behind the camera or outside the image.
std::optional<Pixel> project_local(const CameraModel& cam, const Vec3& local);

struct GazeTrack {
  /// n_steps points from the current gaze towards the target; nullopt when out of frame.
  std::vector<std::optional<Pixel>> points;
  std::size_t target_cell = 0;
  Vec3 target_world = Vec3::Zero();
  Vec3 target_local = Vec3::Zero();
  /// The argmax cell lies behind the camera; every point is then nullopt.
  bool target_behind = false;
};

/// Takes the foveal cell with the highest soft value, maps its centre into the
/// head frame and projects it. Intermediate points slerp the gaze direction
/// from the current gaze to the target. Throws if the foveal channel is
/// missing or constant.
GazeTrack project_to_2d(const Forecast& forecast, const Pose& head_pose, const CameraModel& cam,
                        const GazeSample& current_gaze, int n_steps);

struct Scores2D {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Step-aligned hits within radius_px. Precision is over predicted points in
/// frame, recall over truth points in frame. radius_px <= 0 selects the 2
/// degree radius of `cam`.
Scores2D score_2d(const std::vector<std::optional<Pixel>>& pred, const std::vector<std::optional<Pixel>>& truth,
                  const CameraModel& cam, double radius_px = 0.0);

}  // namespace fovs
