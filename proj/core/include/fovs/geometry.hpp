#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fovs {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// One SLAM semidense observation: world position, inverse-distance
/// variance, and the time it was observed.
struct Keypoint {
  Vec3 position = Vec3::Zero();
  double inv_dist_variance = 0.0;
  double observed_at = 0.0;

  bool operator==(const Keypoint&) const = default;
};

/// Rigid transform from the local central-pupil frame (z forward) to world.
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  double at = 0.0;

  static Pose identity(double t = 0.0);

  Vec3 to_local(const Vec3& world) const;
  Vec3 to_world(const Vec3& local) const;
  Pose inverse() const;
  /// this * other: apply `other` first, then this.
  Pose compose(const Pose& other) const;
  /// Throws std::invalid_argument if the quaternion is not unit within 1e-9.
  void validate() const;

  bool operator==(const Pose& o) const {
    return rotation.coeffs() == o.rotation.coeffs() && translation == o.translation && at == o.at;
  }
};

/// Gaze direction in the local frame.
struct GazeSample {
  Vec3 direction = Vec3::UnitZ();
  double at = 0.0;

  bool operator==(const GazeSample&) const = default;
};

enum class SpanLevel : std::uint8_t { foveal = 0, central = 1, peripheral = 2, orientation = 3 };
inline constexpr std::size_t kNumLevels = 4;
inline constexpr std::array<SpanLevel, kNumLevels> kAllLevels = {
    SpanLevel::foveal, SpanLevel::central, SpanLevel::peripheral, SpanLevel::orientation};

const char* level_name(SpanLevel level);
SpanLevel parse_level(const std::string& name);

struct SpanConfig {
  double cube_length_m = 3.2;
  int resolution = 16;
  /// foveal, central, peripheral (around gaze), orientation (around local z).
  std::array<double, kNumLevels> eccentricities_deg = {2.0, 8.0, 30.0, 55.0};
  int outlier_neighbors = 16;
  double outlier_std_ratio = 2.0;
  bool outlier_filter = true;
  /// Two observations belong to the same frame iff they round to the same
  /// multiple of this quantum.
  double frame_quantum_s = 0.1;

  void validate() const;
  double cell_edge() const { return cube_length_m / resolution; }
  double eccentricity(SpanLevel level) const {
    return eccentricities_deg[static_cast<std::size_t>(level)];
  }

  bool operator==(const SpanConfig&) const = default;
};

/// R^T (point - t).
Vec3 transform_to_local(const Pose& pose, const Vec3& point);
Vec3 transform_to_world(const Pose& pose, const Vec3& local);

std::int64_t frame_index(double t, double quantum);

/// Mean distance from each point to its k nearest neighbours (self excluded).
/// Requires points.size() > k.
std::vector<double> knn_mean_distances(std::span<const Vec3> points, int k);

std::vector<Keypoint> filter_outliers(std::span<const Keypoint> points, const SpanConfig& cfg);

/// Observed-keypoint selection: same frame as t, strictly inside the
/// axis-aligned cube of side D around the pose translation, and surviving the
/// statistical outlier filter (when enabled).
std::vector<Keypoint> select_observed(std::span<const Keypoint> points, const Pose& pose, double t,
                                      const SpanConfig& cfg);

struct ClassifyDiagnostics {
  std::size_t zero_length = 0;
};

/// Points whose local-frame direction lies strictly inside the cone of
/// half-angle theta_deg around `axis`.
std::vector<Keypoint> classify_span(std::span<const Keypoint> points, const Pose& pose,
                                    const Vec3& axis, double theta_deg,
                                    ClassifyDiagnostics* diagnostics = nullptr);

/// Per-level membership flags for every point in one pass: the three gaze
/// levels use `gaze_local`, the orientation level uses local +z.
struct LevelMembership {
  std::vector<std::array<bool, kNumLevels>> inside;
  std::size_t zero_length = 0;
};
LevelMembership classify_levels(std::span<const Keypoint> points, const Pose& pose,
                                const Vec3& gaze_local, const SpanConfig& cfg);

/// All observations that share one frame quantum, with the pose and gaze
/// associated to that frame.
struct FrameBundle {
  double t = 0.0;
  std::int64_t frame = 0;
  Pose pose;
  GazeSample gaze;
  std::vector<Keypoint> points;
};

struct DroppedFrame {
  std::int64_t frame = 0;
  double t = 0.0;
  bool missing_pose = false;
  bool missing_gaze = false;
};

struct AlignedStreams {
  std::vector<FrameBundle> frames;
  std::vector<DroppedFrame> dropped;
  double frame_quantum_s = 0.1;
};

/// Nearest-timestamp association of poses and gazes to each frame quantum
/// present in either the point or pose streams. Ties go to the earlier sample.
/// Inputs need not be sorted.
AlignedStreams align_streams(std::span<const Keypoint> points, std::span<const Pose> poses,
                             std::span<const GazeSample> gazes, double frame_quantum);

/// Index of the sample nearest to t in a time-sorted sequence of timestamps;
/// ties resolve to the earlier one. Returns npos for an empty sequence.
std::size_t nearest_timestamp(std::span<const double> sorted_times, double t);

/// Builds a local->world rotation whose +z is `forward` and +y points away
/// from `up` (camera convention: x right, y down).
Quat look_rotation(const Vec3& forward, const Vec3& up = Vec3::UnitZ());

}  // namespace fovs
