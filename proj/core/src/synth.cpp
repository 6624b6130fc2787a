#include "fovs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "fovs/random.hpp"

namespace fovs::synth {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool inside_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Vec3 slerp_dir(const Vec3& a, const Vec3& b, double u) {
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  const double omega = std::acos(c);
  if (omega < 1e-9) return b;
  const double s = std::sin(omega);
  return ((std::sin((1.0 - u) * omega) / s) * a + (std::sin(u * omega) / s) * b).normalized();
}

// Rotates `dir` by small random angles about two axes perpendicular to it.
Vec3 jitter_direction(const Vec3& dir, double sigma_deg, Rng& rng) {
  if (sigma_deg <= 0.0) return dir;
  Vec3 u = dir.cross(Vec3::UnitZ());
  if (u.norm() < 1e-9) u = dir.cross(Vec3::UnitX());
  u.normalize();
  const Vec3 v = dir.cross(u);
  const double a = rng.normal(0.0, sigma_deg * kDeg);
  const double b = rng.normal(0.0, sigma_deg * kDeg);
  return (dir + std::tan(a) * u + std::tan(b) * v).normalized();
}

void emit_cluster(const ClusterSpec& c, Rng& rng, std::vector<Vec3>& out) {
  for (int i = 0; i < c.point_count; ++i) {
    const Vec3 dir = random_unit(rng);
    const double r = c.radius + rng.normal(0.0, c.surface_noise_m);
    out.push_back(c.center + r * dir);
  }
}

// Position along a polyline walked back and forth at constant speed.
Vec3 walk_position(const std::vector<Vec3>& walk, double speed, double t) {
  if (walk.size() == 1 || speed <= 0.0) return walk.front();
  std::vector<double> seg(walk.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < walk.size(); ++i) {
    seg[i] = (walk[i + 1] - walk[i]).norm();
    total += seg[i];
  }
  if (total <= 0.0) return walk.front();
  double s = std::fmod(speed * t, 2.0 * total);
  if (s > total) s = 2.0 * total - s;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (s <= seg[i] || i + 1 == seg.size()) {
      const double u = seg[i] > 0.0 ? std::min(s / seg[i], 1.0) : 0.0;
      return walk[i] + u * (walk[i + 1] - walk[i]);
    }
    s -= seg[i];
  }
  return walk.back();
}

struct ProgramCursor {
  int step = -1;        // active step, -1 before/without program
  bool in_saccade = false;
  double progress = 0.0;  // saccade progress in [0, 1]
};

ProgramCursor locate(const std::vector<GazeStep>& program, double t) {
  ProgramCursor c;
  double start = 0.0;
  for (std::size_t i = 0; i < program.size(); ++i) {
    const double sac_end = start + program[i].saccade_s;
    const double end = sac_end + program[i].fixation_s;
    if (t < end || i + 1 == program.size()) {
      c.step = static_cast<int>(i);
      if (i > 0 && t < sac_end && program[i].saccade_s > 0.0) {
        c.in_saccade = true;
        c.progress = std::clamp((t - start) / program[i].saccade_s, 0.0, 1.0);
      }
      return c;
    }
    start = end;
  }
  return c;
}

}  // namespace

Vec3 DynamicObject::position_at(double t) const {
  if (trajectory.empty()) return Vec3::Zero();
  if (trajectory.size() == 1) return trajectory.front().position;
  const double period = trajectory.back().t;
  if (loop && period > 0.0) {
    t = std::fmod(t, period);
    if (t < 0.0) t += period;
  }
  if (t <= trajectory.front().t) return trajectory.front().position;
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    const auto& a = trajectory[i];
    const auto& b = trajectory[i + 1];
    if (t <= b.t) {
      const double u = b.t > a.t ? (t - a.t) / (b.t - a.t) : 1.0;
      return a.position + u * (b.position - a.position);
    }
  }
  return trajectory.back().position;
}

Vec3 SceneSpec::room_min() const {
  return Vec3(-0.5 * room_extent_m.x(), -0.5 * room_extent_m.y(), 0.0);
}
Vec3 SceneSpec::room_max() const {
  return Vec3(0.5 * room_extent_m.x(), 0.5 * room_extent_m.y(), room_extent_m.z());
}

void SceneSpec::validate() const {
  if (!(room_extent_m.array() > 0.0).all()) throw std::invalid_argument("room extent must be positive");
  if (wall_point_density < 0.0) throw std::invalid_argument("wall point density must be >= 0");
  const Vec3 lo = room_min();
  const Vec3 hi = room_max();
  for (std::size_t i = 0; i < object_clusters.size(); ++i) {
    const auto& c = object_clusters[i];
    if (!inside_box(c.center, lo, hi)) {
      throw std::invalid_argument("object cluster " + std::to_string(i) + " lies outside the room");
    }
    if (c.radius < 0.0 || c.point_count < 0 || c.surface_noise_m < 0.0) {
      throw std::invalid_argument("object cluster " + std::to_string(i) + " has negative size");
    }
  }
  for (std::size_t i = 0; i < dynamic_objects.size(); ++i) {
    const auto& d = dynamic_objects[i];
    if (d.trajectory.empty()) {
      throw std::invalid_argument("dynamic object " + std::to_string(i) + " has no trajectory");
    }
    for (const auto& w : d.trajectory) {
      if (!inside_box(w.position + d.cluster.center, lo, hi)) {
        throw std::invalid_argument("dynamic object " + std::to_string(i) + " leaves the room");
      }
    }
  }
}

void BehaviorSpec::validate(const SceneSpec& scene) const {
  if (!(duration_s > 0.0)) throw std::invalid_argument("behavior duration must be > 0");
  if (walk.empty()) throw std::invalid_argument("behavior walk needs at least one waypoint");
  if (speed_mps < 0.0) throw std::invalid_argument("walk speed must be >= 0");
  const Vec3 lo = scene.room_min();
  const Vec3 hi = scene.room_max();
  for (const auto& w : walk) {
    if (!inside_box(w, lo, hi)) throw std::invalid_argument("walk waypoint lies outside the room");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < gaze_program.size(); ++i) {
    const auto& s = gaze_program[i];
    if (s.target < 0 || static_cast<std::size_t>(s.target) >= scene.target_count()) {
      throw std::invalid_argument("gaze step " + std::to_string(i) + " targets unknown object " +
                                  std::to_string(s.target));
    }
    if (s.fixation_s < 0.0 || s.saccade_s < 0.0) {
      throw std::invalid_argument("gaze step durations must be >= 0");
    }
    total += s.fixation_s + s.saccade_s;
  }
  if (total > duration_s + 1e-9) {
    throw std::invalid_argument("gaze program is longer than the behavior duration");
  }
  if (head_lag_deg < 0.0 || head_lag_deg >= 180.0) throw std::invalid_argument("head lag must lie in [0, 180)");
  if (observation_jitter_m < 0.0) throw std::invalid_argument("observation jitter must be >= 0");
}

std::vector<Vec3> static_points(const SceneSpec& scene) {
  Rng rng(mix_seed(scene.seed, 1));
  std::vector<Vec3> out;
  const Vec3 lo = scene.room_min();
  const Vec3 hi = scene.room_max();
  const Vec3 e = scene.room_extent_m;

  // Faces: x = lo, x = hi, y = lo, y = hi, z = lo, z = hi.
  for (int axis = 0; axis < 3; ++axis) {
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    const double area = e[a] * e[b];
    const auto n = static_cast<long>(std::llround(scene.wall_point_density * area));
    for (int side = 0; side < 2; ++side) {
      for (long i = 0; i < n; ++i) {
        Vec3 p;
        p[axis] = side == 0 ? lo[axis] : hi[axis];
        p[a] = rng.uniform(lo[a], hi[a]);
        p[b] = rng.uniform(lo[b], hi[b]);
        out.push_back(p);
      }
    }
  }
  for (const auto& c : scene.object_clusters) {
    const std::size_t first = out.size();
    emit_cluster(c, rng, out);
    for (std::size_t i = first; i < out.size(); ++i) out[i] = out[i].cwiseMax(lo).cwiseMin(hi);
  }
  return out;
}

Recording generate(const SceneSpec& scene, const BehaviorSpec& behavior,
                   const GenerationOptions& options) {
  scene.validate();
  behavior.validate(scene);
  options.span.validate();
  const double q = options.frame_quantum_s;
  if (!(q > 0.0)) throw std::invalid_argument("frame quantum must be > 0");

  const std::vector<Vec3> statics = static_points(scene);
  std::vector<std::vector<Vec3>> dynamic_offsets;
  {
    Rng rng(mix_seed(scene.seed, 2));
    for (const auto& d : scene.dynamic_objects) {
      ClusterSpec c = d.cluster;
      std::vector<Vec3> pts;
      emit_cluster(c, rng, pts);
      dynamic_offsets.push_back(std::move(pts));
    }
  }

  const Vec3 room_lo = scene.room_min();
  const Vec3 room_hi = scene.room_max();
  const std::size_t n_static_targets = scene.object_clusters.size();
  auto target_position = [&](int target, double t) -> Vec3 {
    const auto idx = static_cast<std::size_t>(target);
    if (idx < n_static_targets) return scene.object_clusters[idx].center;
    const auto& d = scene.dynamic_objects[idx - n_static_targets];
    return d.position_at(t) + d.cluster.center;
  };

  Rng gaze_rng(mix_seed(behavior.seed, 3));
  Rng obs_rng(mix_seed(behavior.seed, 4));

  const auto n_frames = static_cast<std::size_t>(std::llround(behavior.duration_s / q));
  const double half_cube = 0.5 * options.span.cube_length_m;
  std::array<double, kNumLevels> cos_theta{};
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    cos_theta[l] = std::cos(options.span.eccentricities_deg[l] * kDeg);
  }
  const double cos_view = cos_theta[kNumLevels - 1];
  const double view_deg = options.span.eccentricities_deg[kNumLevels - 1];
  const int bins = 2 * static_cast<int>(std::ceil(view_deg / options.zbuffer_bin_deg)) + 1;
  const double jitter_axis = behavior.observation_jitter_m / std::sqrt(3.0);

  Recording rec;
  rec.poses.reserve(n_frames);
  rec.gazes.reserve(n_frames);
  rec.truth.reserve(n_frames);
  rec.gaze_targets.reserve(n_frames);

  Vec3 head_dir = Vec3::UnitX();
  std::vector<Vec3> world;
  std::vector<double> zbuf(static_cast<std::size_t>(bins) * bins);
  std::vector<int> bin_of;
  std::vector<double> dist;

  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) * q;
    const Vec3 eye = walk_position(behavior.walk, behavior.speed_mps, t);

    // Gaze in world coordinates.
    Vec3 gaze_world = head_dir;
    int target = -1;
    if (!behavior.gaze_program.empty()) {
      const auto cur = locate(behavior.gaze_program, t);
      target = behavior.gaze_program[static_cast<std::size_t>(cur.step)].target;
      const Vec3 to = (target_position(target, t) - eye).normalized();
      if (cur.in_saccade) {
        const int prev = behavior.gaze_program[static_cast<std::size_t>(cur.step) - 1].target;
        const Vec3 from = (target_position(prev, t) - eye).normalized();
        const double u = cur.progress * cur.progress * (3.0 - 2.0 * cur.progress);
        gaze_world = slerp_dir(from, to, u);
      } else {
        gaze_world = to;
      }
    }
    gaze_world = jitter_direction(gaze_world, behavior.fixation_jitter_deg, gaze_rng);

    // Head trails the gaze: close a fraction of the gap, never lag more than head_lag_deg.
    if (k == 0) {
      head_dir = gaze_world;
    } else {
      const double gap = std::acos(std::clamp(head_dir.dot(gaze_world), -1.0, 1.0));
      double remaining = gap * std::exp(-behavior.head_follow_rate * q);
      remaining = std::min(remaining, behavior.head_lag_deg * kDeg);
      head_dir = gap > 1e-12 ? slerp_dir(gaze_world, head_dir, remaining / gap) : gaze_world;
    }

    Pose pose{look_rotation(head_dir), eye, t};
    const Vec3 head_forward = pose.rotation * Vec3::UnitZ();
    const Vec3 gaze_local = (pose.rotation.conjugate() * gaze_world).normalized();
    const Vec3 gaze_axis = pose.rotation * gaze_local;
    rec.poses.push_back(pose);
    rec.gazes.push_back({gaze_local, t});
    rec.gaze_targets.push_back(target);

    // Candidate world points: statics plus dynamic objects at time t.
    world.assign(statics.begin(), statics.end());
    for (std::size_t d = 0; d < scene.dynamic_objects.size(); ++d) {
      const Vec3 base = scene.dynamic_objects[d].position_at(t) + scene.dynamic_objects[d].cluster.center;
      for (const auto& off : dynamic_offsets[d]) world.push_back((base + off).cwiseMax(room_lo).cwiseMin(room_hi));
    }

    // Angular z-buffer over the orientation cone.
    std::fill(zbuf.begin(), zbuf.end(), std::numeric_limits<double>::infinity());
    bin_of.assign(world.size(), -1);
    dist.assign(world.size(), 0.0);
    const Quat inv = pose.rotation.conjugate();
    for (std::size_t i = 0; i < world.size(); ++i) {
      const Vec3 v = inv * (world[i] - eye);
      const double n = v.norm();
      if (n <= 0.0 || v.z() <= n * cos_view) continue;
      const double az = std::atan2(v.x(), v.z()) / kDeg;
      const double el = std::atan2(v.y(), std::hypot(v.x(), v.z())) / kDeg;
      const int bx = std::clamp(static_cast<int>(std::floor(az / options.zbuffer_bin_deg)) + bins / 2, 0, bins - 1);
      const int by = std::clamp(static_cast<int>(std::floor(el / options.zbuffer_bin_deg)) + bins / 2, 0, bins - 1);
      const int b = by * bins + bx;
      bin_of[i] = b;
      dist[i] = n;
      zbuf[static_cast<std::size_t>(b)] = std::min(zbuf[static_cast<std::size_t>(b)], n);
    }

    FrameTruth truth;
    truth.t = t;
    truth.begin = rec.points.size();
    for (std::size_t i = 0; i < world.size(); ++i) {
      if (bin_of[i] < 0) continue;
      if (dist[i] > zbuf[static_cast<std::size_t>(bin_of[i])] + options.occlusion_tolerance_m) continue;
      Keypoint kp;
      kp.position = world[i];
      if (jitter_axis > 0.0) {
        kp.position += Vec3(obs_rng.uniform(-jitter_axis, jitter_axis), obs_rng.uniform(-jitter_axis, jitter_axis),
                            obs_rng.uniform(-jitter_axis, jitter_axis));
      }
      kp.inv_dist_variance = obs_rng.uniform(1e-3, 1e-2);
      kp.observed_at = t;
      const std::size_t index = rec.points.size();
      rec.points.push_back(kp);

      // Ground truth straight from world-frame angles.
      const Vec3 v = kp.position - eye;
      if (!(std::abs(v.x()) < half_cube && std::abs(v.y()) < half_cube && std::abs(v.z()) < half_cube)) continue;
      truth.scene.push_back(index);
      const double n = v.norm();
      if (n == 0.0) continue;
      const double c_gaze = v.dot(gaze_axis) / (n * gaze_axis.norm());
      for (std::size_t l = 0; l + 1 < kNumLevels; ++l) {
        if (c_gaze > cos_theta[l]) truth.levels[l].push_back(index);
      }
      if (v.dot(head_forward) / n > cos_theta[kNumLevels - 1]) truth.levels[kNumLevels - 1].push_back(index);
    }
    truth.end = rec.points.size();
    rec.truth.push_back(std::move(truth));
  }
  return rec;
}

OutlierInjection inject_outliers(const std::vector<Keypoint>& stream, double rate,
                                 double magnitude_m, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("outlier rate must lie in [0, 1]");
  OutlierInjection out;
  out.points = stream;
  if (stream.empty() || rate == 0.0) return out;

  const auto count = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(stream.size()) - 1e-9));
  Rng rng(seed);
  for (std::size_t m = 0; m < count; ++m) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const auto& src = stream[rng.below(stream.size())];
      const Vec3 cand = src.position + rng.uniform(1.0, 1.5) * magnitude_m * random_unit(rng);
      bool isolated = true;
      for (const auto& p : stream) {
        if ((p.position - cand).norm() < magnitude_m) {
          isolated = false;
          break;
        }
      }
      if (!isolated) continue;
      out.injected.push_back(out.points.size());
      out.points.push_back(Keypoint{cand, rng.uniform(1e-3, 1e-2), src.observed_at});
      placed = true;
    }
    if (!placed) throw std::runtime_error("inject_outliers: could not place an isolated point");
  }
  return out;
}

SceneSpec standard_scene(std::uint64_t seed, double density_scale) {
  if (!(density_scale > 0.0)) throw std::invalid_argument("density scale must be > 0");
  SceneSpec s;
  s.seed = seed;
  s.room_extent_m = Vec3(3.0, 3.0, 2.8);
  Rng rng(mix_seed(seed, 10));
  constexpr int kObjects = 8;
  const int cluster_points = static_cast<int>(std::lround(600 * density_scale));
  for (int i = 0; i < kObjects; ++i) {
    const double az = (i * 360.0 / kObjects + rng.uniform(-10.0, 10.0)) * kDeg;
    const double r = rng.uniform(0.9, 1.25);
    const double h = rng.uniform(0.8, 1.9);
    ClusterSpec c;
    c.center = Vec3(r * std::cos(az), r * std::sin(az), h);
    c.radius = rng.uniform(0.10, 0.16);
    c.point_count = cluster_points;
    c.surface_noise_m = 0.004;
    s.object_clusters.push_back(c);
  }
  DynamicObject mover;
  mover.cluster.center = Vec3::Zero();
  mover.cluster.radius = 0.08;
  mover.cluster.point_count = static_cast<int>(std::lround(400 * density_scale));
  mover.cluster.surface_noise_m = 0.004;
  constexpr int kSegments = 36;
  constexpr double kPeriod = 36.0;
  for (int i = 0; i <= kSegments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kSegments;
    mover.trajectory.push_back({kPeriod * i / kSegments, Vec3(0.7 * std::cos(a), 0.7 * std::sin(a), 1.0)});
  }
  s.dynamic_objects.push_back(mover);

  const double area = 2.0 * (3.0 * 2.8) * 2.0 + 2.0 * 9.0;
  const double target_total = 5.0e4 * density_scale;
  const double remaining = target_total - kObjects * cluster_points;
  s.wall_point_density = std::max(remaining, 0.0) / area;
  return s;
}

BehaviorSpec touring_behavior(const SceneSpec& scene, std::uint64_t seed, double duration_s) {
  BehaviorSpec b;
  b.seed = seed;
  b.duration_s = duration_s;
  Rng rng(mix_seed(seed, 20));
  b.walk = {Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 1.45),
            Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 1.45),
            Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 1.45)};
  b.speed_mps = 0.05;
  b.head_lag_deg = 25.0;
  b.head_follow_rate = 2.0;

  const std::size_t n_static = scene.object_clusters.size();
  if (n_static == 0) return b;
  std::vector<std::size_t> order(n_static);
  for (std::size_t i = 0; i < n_static; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    const auto& pa = scene.object_clusters[a].center;
    const auto& pc = scene.object_clusters[c].center;
    return std::atan2(pa.y(), pa.x()) < std::atan2(pc.y(), pc.x());
  });
  const long direction = rng.uniform() < 0.5 ? 1 : -1;
  long cursor = static_cast<long>(rng.below(n_static));
  const auto n = static_cast<long>(n_static);

  double used = 0.0;
  while (used < duration_s) {
    GazeStep step;
    const double roll = rng.uniform();
    if (roll < 0.08 && !scene.dynamic_objects.empty()) {
      step.target = static_cast<int>(n_static + rng.below(scene.dynamic_objects.size()));
    } else {
      cursor += roll < 0.85 ? direction : 2 * direction;
      step.target = static_cast<int>(order[static_cast<std::size_t>(((cursor % n) + n) % n)]);
    }
    step.saccade_s = used == 0.0 ? 0.0 : rng.uniform(0.03, 0.06);
    step.fixation_s = rng.uniform(0.8, 2.0);
    const double left = duration_s - used;
    if (step.saccade_s + step.fixation_s >= left) {
      step.saccade_s = std::min(step.saccade_s, left);
      step.fixation_s = left - step.saccade_s;
      b.gaze_program.push_back(step);
      break;
    }
    used += step.saccade_s + step.fixation_s;
    b.gaze_program.push_back(step);
  }
  return b;
}

}  // namespace fovs::synth
