#include "fovs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace fovs {

Pose Pose::identity(double t) { return Pose{Quat::Identity(), Vec3::Zero(), t}; }

Vec3 Pose::to_local(const Vec3& world) const { return transform_to_local(*this, world); }
Vec3 Pose::to_world(const Vec3& local) const { return transform_to_world(*this, local); }

Pose Pose::inverse() const {
  const Quat inv = rotation.conjugate();
  return Pose{inv, -(inv * translation), at};
}

Pose Pose::compose(const Pose& other) const {
  Quat q = rotation * other.rotation;
  q.normalize();
  return Pose{q, rotation * other.translation + translation, other.at};
}

void Pose::validate() const {
  if (std::abs(rotation.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("pose rotation is not a unit quaternion");
  }
  if (!translation.allFinite() || !std::isfinite(at)) {
    throw std::invalid_argument("pose has non-finite translation or timestamp");
  }
}

const char* level_name(SpanLevel level) {
  switch (level) {
    case SpanLevel::foveal: return "foveal";
    case SpanLevel::central: return "central";
    case SpanLevel::peripheral: return "peripheral";
    case SpanLevel::orientation: return "orientation";
  }
  return "unknown";
}

SpanLevel parse_level(const std::string& name) {
  for (auto level : kAllLevels) {
    if (name == level_name(level)) return level;
  }
  throw std::invalid_argument("unknown span level '" + name + "'");
}

void SpanConfig::validate() const {
  if (!(cube_length_m > 0.0) || !std::isfinite(cube_length_m)) {
    throw std::invalid_argument("cube_length_m must be > 0");
  }
  if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    const double e = eccentricities_deg[i];
    if (!(e > 0.0 && e < 180.0)) throw std::invalid_argument("eccentricity must lie in (0, 180)");
    if (i > 0 && !(eccentricities_deg[i - 1] < e)) {
      throw std::invalid_argument("eccentricities must be strictly increasing");
    }
  }
  if (outlier_neighbors < 1) throw std::invalid_argument("outlier_neighbors must be >= 1");
  if (!(outlier_std_ratio >= 0.0)) throw std::invalid_argument("outlier_std_ratio must be >= 0");
  if (!(frame_quantum_s > 0.0)) throw std::invalid_argument("frame_quantum_s must be > 0");
}

Vec3 transform_to_local(const Pose& pose, const Vec3& point) {
  return pose.rotation.conjugate() * (point - pose.translation);
}

Vec3 transform_to_world(const Pose& pose, const Vec3& local) {
  return pose.rotation * local + pose.translation;
}

std::int64_t frame_index(double t, double quantum) {
  return static_cast<std::int64_t>(std::llround(t / quantum));
}

std::vector<Keypoint> select_observed(std::span<const Keypoint> points, const Pose& pose, double t,
                                      const SpanConfig& cfg) {
  const double q = cfg.frame_quantum_s;
  if (std::abs(pose.at - t) > 0.5 * q + 1e-9) {
    throw std::invalid_argument("select_observed: pose timestamp does not match frame time");
  }
  const std::int64_t frame = frame_index(t, q);
  const double half = 0.5 * cfg.cube_length_m;

  std::vector<Keypoint> candidates;
  for (const auto& p : points) {
    if (frame_index(p.observed_at, q) != frame) continue;
    const Vec3 d = (p.position - pose.translation).cwiseAbs();
    if (d.x() < half && d.y() < half && d.z() < half) candidates.push_back(p);
  }
  if (!cfg.outlier_filter) return candidates;
  return filter_outliers(candidates, cfg);
}

std::vector<Keypoint> classify_span(std::span<const Keypoint> points, const Pose& pose,
                                    const Vec3& axis, double theta_deg,
                                    ClassifyDiagnostics* diagnostics) {
  if (!(theta_deg > 0.0 && theta_deg < 180.0)) {
    throw std::invalid_argument("classify_span: theta must lie in (0, 180) degrees");
  }
  const double axis_norm = axis.norm();
  if (!(axis_norm > 0.0)) throw std::invalid_argument("classify_span: zero axis");
  const double cos_theta = std::cos(theta_deg * std::numbers::pi / 180.0);
  const Quat inv = pose.rotation.conjugate();

  std::vector<Keypoint> inside;
  for (const auto& p : points) {
    const Vec3 local = inv * (p.position - pose.translation);
    const double n = local.norm();
    if (n == 0.0) {
      if (diagnostics != nullptr) ++diagnostics->zero_length;
      continue;
    }
    if (local.dot(axis) / (n * axis_norm) > cos_theta) inside.push_back(p);
  }
  return inside;
}

LevelMembership classify_levels(std::span<const Keypoint> points, const Pose& pose,
                                const Vec3& gaze_local, const SpanConfig& cfg) {
  std::array<double, kNumLevels> cos_theta{};
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    cos_theta[l] = std::cos(cfg.eccentricities_deg[l] * std::numbers::pi / 180.0);
  }
  const double gaze_norm = gaze_local.norm();
  const Quat inv = pose.rotation.conjugate();
  const Vec3 forward = Vec3::UnitZ();

  LevelMembership out;
  out.inside.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 local = inv * (points[i].position - pose.translation);
    const double n = local.norm();
    auto& flags = out.inside[i];
    if (n == 0.0) {
      flags.fill(false);
      ++out.zero_length;
      continue;
    }
    const double c_gaze = local.dot(gaze_local) / (n * gaze_norm);
    for (std::size_t l = 0; l + 1 < kNumLevels; ++l) flags[l] = c_gaze > cos_theta[l];
    flags[kNumLevels - 1] = local.dot(forward) / n > cos_theta[kNumLevels - 1];
  }
  return out;
}

std::size_t nearest_timestamp(std::span<const double> sorted_times, double t) {
  if (sorted_times.empty()) return static_cast<std::size_t>(-1);
  const auto it = std::lower_bound(sorted_times.begin(), sorted_times.end(), t);
  if (it == sorted_times.begin()) return 0;
  if (it == sorted_times.end()) return sorted_times.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - sorted_times.begin());
  const std::size_t lo = hi - 1;
  return (t - sorted_times[lo] <= sorted_times[hi] - t) ? lo : hi;
}

AlignedStreams align_streams(std::span<const Keypoint> points, std::span<const Pose> poses,
                             std::span<const GazeSample> gazes, double frame_quantum) {
  if (!(frame_quantum > 0.0)) throw std::invalid_argument("align_streams: frame quantum must be > 0");

  std::vector<Pose> pose_sorted(poses.begin(), poses.end());
  std::stable_sort(pose_sorted.begin(), pose_sorted.end(),
                   [](const Pose& a, const Pose& b) { return a.at < b.at; });
  std::vector<GazeSample> gaze_sorted(gazes.begin(), gazes.end());
  std::stable_sort(gaze_sorted.begin(), gaze_sorted.end(),
                   [](const GazeSample& a, const GazeSample& b) { return a.at < b.at; });
  std::vector<double> pose_times(pose_sorted.size());
  std::vector<double> gaze_times(gaze_sorted.size());
  for (std::size_t i = 0; i < pose_sorted.size(); ++i) pose_times[i] = pose_sorted[i].at;
  for (std::size_t i = 0; i < gaze_sorted.size(); ++i) gaze_times[i] = gaze_sorted[i].at;

  std::map<std::int64_t, std::vector<Keypoint>> by_frame;
  for (const auto& p : points) by_frame[frame_index(p.observed_at, frame_quantum)].push_back(p);
  for (const auto& p : pose_sorted) by_frame.try_emplace(frame_index(p.at, frame_quantum));

  const double tolerance = 0.5 * frame_quantum + 1e-9;
  AlignedStreams out;
  out.frame_quantum_s = frame_quantum;
  for (auto& [frame, pts] : by_frame) {
    const double t = static_cast<double>(frame) * frame_quantum;
    const std::size_t ip = nearest_timestamp(pose_times, t);
    const std::size_t ig = nearest_timestamp(gaze_times, t);
    const bool pose_ok = !pose_times.empty() && std::abs(pose_times[ip] - t) <= tolerance;
    const bool gaze_ok = !gaze_times.empty() && std::abs(gaze_times[ig] - t) <= tolerance;
    if (!pose_ok || !gaze_ok) {
      out.dropped.push_back({frame, t, !pose_ok, !gaze_ok});
      continue;
    }
    FrameBundle b;
    b.t = t;
    b.frame = frame;
    b.pose = pose_sorted[ip];
    b.gaze = gaze_sorted[ig];
    b.points = std::move(pts);
    out.frames.push_back(std::move(b));
  }
  return out;
}

Quat look_rotation(const Vec3& forward, const Vec3& up) {
  const Vec3 f = forward.normalized();
  Vec3 right = f.cross(up);
  if (right.norm() < 1e-9) right = f.cross(Vec3::UnitX());
  if (right.norm() < 1e-9) right = f.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = f.cross(right);
  Eigen::Matrix3d m;
  m.col(0) = right;
  m.col(1) = down;
  m.col(2) = f;
  Quat q(m);
  q.normalize();
  return q;
}

}  // namespace fovs
