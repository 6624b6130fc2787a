#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fovs/geometry.hpp"

namespace fovs::synth {

/// Points scattered on a sphere surface with radial noise.
struct ClusterSpec {
  Vec3 center = Vec3::Zero();
  double radius = 0.1;
  int point_count = 500;
  double surface_noise_m = 0.005;
};

struct TimedPosition {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

/// A cluster carried along a piecewise-linear trajectory; `cluster.center`
/// is an offset from the trajectory position.
struct DynamicObject {
  std::vector<TimedPosition> trajectory;
  ClusterSpec cluster;
  /// Repeat the trajectory with period equal to its last timestamp.
  bool loop = true;

  Vec3 position_at(double t) const;
};

/// Room is the box [-x/2, x/2] x [-y/2, y/2] x [0, z] with world z up.
struct SceneSpec {
  std::uint64_t seed = 42;
  Vec3 room_extent_m = Vec3(3.0, 3.0, 2.8);
  std::vector<ClusterSpec> object_clusters;
  double wall_point_density = 800.0;  // points per m^2, all six faces
  std::vector<DynamicObject> dynamic_objects;

  void validate() const;
  /// Static targets come first, then dynamic objects.
  std::size_t target_count() const { return object_clusters.size() + dynamic_objects.size(); }
  Vec3 room_min() const;
  Vec3 room_max() const;
};

struct GazeStep {
  int target = 0;
  double fixation_s = 1.0;
  double saccade_s = 0.05;
};

struct BehaviorSpec {
  std::uint64_t seed = 7;
  double duration_s = 10.0;
  /// Eye positions; the agent walks the polyline back and forth at `speed_mps`.
  std::vector<Vec3> walk = {Vec3(0.0, 0.0, 1.45)};
  double speed_mps = 0.0;
  std::vector<GazeStep> gaze_program;
  /// Maximum angle by which head orientation trails the gaze direction.
  double head_lag_deg = 20.0;
  /// Fraction of the remaining head/gaze angle closed per second.
  double head_follow_rate = 2.0;
  double fixation_jitter_deg = 0.2;
  /// Per-observation position noise; every emitted point lies within this
  /// distance of its true position.
  double observation_jitter_m = 0.005;

  void validate(const SceneSpec& scene) const;
};

struct GenerationOptions {
  double frame_quantum_s = 0.1;
  /// Cube and eccentricities used for the ground-truth labels.
  SpanConfig span;
  /// Angular bin size of the occlusion buffer.
  double zbuffer_bin_deg = 1.0;
  /// Points within this distance behind the nearest point in their bin stay visible.
  double occlusion_tolerance_m = 0.05;
};

/// Exact per-frame classification, as indices into Recording::points.
struct FrameTruth {
  double t = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> scene;
  std::array<std::vector<std::size_t>, kNumLevels> levels;
};

struct Recording {
  std::vector<Keypoint> points;
  std::vector<Pose> poses;
  std::vector<GazeSample> gazes;
  std::vector<FrameTruth> truth;
  /// Gaze target index per frame (-1 while no program step is active).
  std::vector<int> gaze_targets;
};

/// Deterministic synthetic recording: per frame, the points visible inside
/// the orientation cone of the head pose and not occluded, plus pose, gaze
/// and ground-truth span membership.
Recording generate(const SceneSpec& scene, const BehaviorSpec& behavior,
                   const GenerationOptions& options = {});

/// The world's static points (walls + static clusters) before visibility.
std::vector<Vec3> static_points(const SceneSpec& scene);

struct OutlierInjection {
  std::vector<Keypoint> points;
  /// Indices of injected points within `points`, ascending.
  std::vector<std::size_t> injected;
};

/// Appends ceil(rate * N) isolated points, each at least `magnitude_m` away
/// from every original point and sharing the timestamp of a random original
/// observation. Rate must lie in [0, 1].
OutlierInjection inject_outliers(const std::vector<Keypoint>& stream, double rate,
                                 double magnitude_m, std::uint64_t seed);

/// Desk-scale default scene: a 3 x 3 x 2.8 m room, eight static objects
/// around the agent and one moving object; about 5e4 static points at the
/// default density scale.
SceneSpec standard_scene(std::uint64_t seed = 42, double density_scale = 1.0);

/// Tour over the scene's static objects in angular order with occasional
/// skips and glances at dynamic objects. Tour direction is drawn from the seed.
BehaviorSpec touring_behavior(const SceneSpec& scene, std::uint64_t seed, double duration_s);

}  // namespace fovs::synth
