#include "fovs/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fovs {

void CameraModel::validate() const {
  if (!(focal_px > 0.0)) throw std::invalid_argument("camera focal length must be > 0");
  if (!(image_size_px.x() > 0.0 && image_size_px.y() > 0.0)) throw std::invalid_argument("camera image size must be > 0");
  if (!(principal_point_px.x() >= 0.0 && principal_point_px.x() <= image_size_px.x() &&
        principal_point_px.y() >= 0.0 && principal_point_px.y() <= image_size_px.y())) {
    throw std::invalid_argument("camera principal point must lie inside the image");
  }
}

double CameraModel::radius_for_degrees(double degrees) const {
  return focal_px * std::tan(degrees * std::numbers::pi / 180.0);
}

std::optional<Pixel> project_local(const CameraModel& cam, const Vec3& local) {
  if (!(local.z() > 0.0)) return std::nullopt;
  const Pixel p(cam.principal_point_px.x() + cam.focal_px * local.x() / local.z(),
                cam.principal_point_px.y() + cam.focal_px * local.y() / local.z());
  if (p.x() < 0.0 || p.y() < 0.0 || p.x() >= cam.image_size_px.x() || p.y() >= cam.image_size_px.y()) {
    return std::nullopt;
  }
  return p;
}

namespace {

Vec3 slerp(const Vec3& a, const Vec3& b, double t) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  const double omega = std::acos(c);
  if (omega < 1e-12) return b;
  const double s = std::sin(omega);
  return (std::sin((1.0 - t) * omega) / s) * a + (std::sin(t * omega) / s) * b;
}

}  // namespace

GazeTrack project_to_2d(const Forecast& forecast, const Pose& head_pose, const CameraModel& cam,
                        const GazeSample& current_gaze, int n_steps) {
  cam.validate();
  if (n_steps < 1) throw std::invalid_argument("project_to_2d: n_steps must be >= 1");
  const auto soft = forecast.soft_level(SpanLevel::foveal);
  if (soft.empty()) throw std::invalid_argument("project_to_2d: forecast has no foveal channel");
  const auto [lo, hi] = std::minmax_element(soft.begin(), soft.end());
  if (*lo == *hi) throw std::invalid_argument("project_to_2d: foveal channel is constant");

  GazeTrack track;
  track.target_cell = static_cast<std::size_t>(hi - soft.begin());
  const OccupancyGrid geometry(forecast.resolution, forecast.cube_length, forecast.origin);
  const auto ijk = geometry.cell_of(track.target_cell);
  track.target_world = geometry.cell_center(ijk[0], ijk[1], ijk[2]);
  track.target_local = transform_to_local(head_pose, track.target_world);
  track.points.assign(static_cast<std::size_t>(n_steps), std::nullopt);
  if (!(track.target_local.z() > 0.0)) {
    track.target_behind = true;
    return track;
  }
  const Vec3 to = track.target_local.normalized();
  const double gn = current_gaze.direction.norm();
  const Vec3 from = gn > 0.0 ? Vec3(current_gaze.direction / gn) : to;
  for (int k = 1; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) / n_steps;
    track.points[static_cast<std::size_t>(k - 1)] = project_local(cam, k == n_steps ? to : slerp(from, to, t));
  }
  return track;
}

Scores2D score_2d(const std::vector<std::optional<Pixel>>& pred, const std::vector<std::optional<Pixel>>& truth,
                  const CameraModel& cam, double radius_px) {
  if (pred.size() != truth.size()) throw std::invalid_argument("score_2d: sequences differ in length");
  const double r = radius_px > 0.0 ? radius_px : cam.radius_for_degrees(2.0);
  std::size_t hits = 0, n_pred = 0, n_truth = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) ++n_pred;
    if (truth[i]) ++n_truth;
    if (pred[i] && truth[i] && (*pred[i] - *truth[i]).norm() <= r) ++hits;
  }
  Scores2D s;
  s.precision = n_pred > 0 ? static_cast<double>(hits) / static_cast<double>(n_pred) : 0.0;
  s.recall = n_truth > 0 ? static_cast<double>(hits) / static_cast<double>(n_truth) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace fovs
