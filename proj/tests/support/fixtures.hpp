#pragma once

#include <cmath>
#include <vector>

#include "fovs/dataset.hpp"
#include "fovs/geometry.hpp"
#include "fovs/random.hpp"
#include "fovs/synth.hpp"

namespace fovs::testing {

inline Quat random_rotation(Rng& rng) {
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q;
}

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

/// One frame-sized window: a few dense clusters, uniform clutter around the
/// head, a handful of far outliers and points from neighbouring frames.
struct RandomWindow {
  std::vector<Keypoint> points;
  Pose pose;
  Vec3 gaze = Vec3::UnitZ();
  double t = 0.0;
};

inline RandomWindow random_window(std::uint64_t seed, std::size_t max_points, const SpanConfig& cfg) {
  Rng rng(seed);
  RandomWindow w;
  const std::int64_t frame = static_cast<std::int64_t>(rng.below(1000));
  w.t = static_cast<double>(frame) * cfg.frame_quantum_s;
  w.pose = Pose{random_rotation(rng), Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2)),
                w.t + rng.uniform(-0.4, 0.4) * cfg.frame_quantum_s};
  w.gaze = (Vec3::UnitZ() + 0.4 * random_unit(rng)).normalized();
  const std::size_t n = max_points / 4 + rng.below(max_points - max_points / 4 + 1);
  const double half = 0.5 * cfg.cube_length_m;
  const auto stamp = [&] {
    const double u = rng.uniform();
    const std::int64_t f = u < 0.8 ? frame : frame + (u < 0.9 ? -1 : 1);
    return static_cast<double>(f) * cfg.frame_quantum_s + rng.uniform(-0.45, 0.45) * cfg.frame_quantum_s;
  };
  const int clusters = 2 + static_cast<int>(rng.below(5));
  std::vector<Vec3> centres;
  for (int c = 0; c < clusters; ++c) {
    centres.push_back(w.pose.translation + Vec3(rng.uniform(-half, half), rng.uniform(-half, half),
                                                rng.uniform(-half, half)));
  }
  while (w.points.size() < n) {
    Keypoint k;
    const double u = rng.uniform();
    if (u < 0.7) {
      const Vec3& c = centres[rng.below(centres.size())];
      k.position = c + 0.15 * Vec3(rng.normal(), rng.normal(), rng.normal());
    } else if (u < 0.98) {
      k.position = w.pose.translation + 1.2 * half * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } else {
      k.position = w.pose.translation + 3.0 * half * random_unit(rng);
    }
    k.inv_dist_variance = rng.uniform(0.0, 0.01);
    k.observed_at = stamp();
    w.points.push_back(k);
  }
  // Exact duplicates and a point at the head position exercise the ties and
  // the zero-length direction.
  for (int d = 0; d < 5 && !w.points.empty(); ++d) w.points.push_back(w.points[rng.below(w.points.size())]);
  Keypoint at_head;
  at_head.position = w.pose.translation;
  at_head.observed_at = w.t;
  w.points.push_back(at_head);
  return w;
}

/// A short synthetic recording with a stationary agent in the standard scene.
inline synth::Recording small_recording(double duration_s, std::uint64_t seed = 42, double density = 0.3) {
  const auto scene = synth::standard_scene(seed, density);
  const auto behavior = synth::touring_behavior(scene, mix_seed(seed, 1000), duration_s);
  return synth::generate(scene, behavior);
}

inline AlignedStreams align(const synth::Recording& rec, double quantum = 0.1) {
  return align_streams(rec.points, rec.poses, rec.gazes, quantum);
}

}  // namespace fovs::testing
