#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "fovs/synth.hpp"
#include "fovs/voxel.hpp"
#include "oracles.hpp"

namespace fovs {
namespace {

using namespace synth;

TEST(Synth, GenerationIsDeterministic) {
  const auto a = testing::small_recording(3.0, 5);
  const auto b = testing::small_recording(3.0, 5);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.poses, b.poses);
  EXPECT_EQ(a.gazes, b.gazes);
  EXPECT_EQ(a.gaze_targets, b.gaze_targets);
}

TEST(Synth, DifferentSeedsDiffer) {
  EXPECT_NE(testing::small_recording(2.0, 5).points, testing::small_recording(2.0, 6).points);
}

TEST(Synth, StreamsAreWellFormed) {
  const auto scene = standard_scene(42, 0.3);
  const auto rec = testing::small_recording(4.0);
  ASSERT_EQ(rec.poses.size(), 40u);
  ASSERT_EQ(rec.gazes.size(), rec.poses.size());
  for (std::size_t i = 0; i < rec.poses.size(); ++i) {
    EXPECT_NO_THROW(rec.poses[i].validate());
    EXPECT_NEAR(rec.gazes[i].direction.norm(), 1.0, 1e-12);
    EXPECT_EQ(rec.gazes[i].at, rec.poses[i].at);
  }
  const Vec3 slack = Vec3::Constant(0.01);
  for (const auto& p : rec.points) {
    EXPECT_TRUE((p.position.array() >= (scene.room_min() - slack).array()).all());
    EXPECT_TRUE((p.position.array() <= (scene.room_max() + slack).array()).all());
  }
}

TEST(Synth, StaticClusterFixationLandsInFoveaAtGazeDepth) {
  SceneSpec scene;
  scene.wall_point_density = 200.0;
  // Dense enough that every occlusion bin behind the fixation holds a cluster point.
  scene.object_clusters.push_back({Vec3(1.0, 0.0, 1.45), 0.08, 6000, 0.0});
  BehaviorSpec behavior;
  behavior.duration_s = 1.0;
  behavior.gaze_program = {{0, 1.0, 0.0}};
  behavior.fixation_jitter_deg = 0.0;
  behavior.observation_jitter_m = 0.0;
  const auto rec = generate(scene, behavior);
  for (const auto& truth : rec.truth) {
    ASSERT_FALSE(truth.levels[0].empty());
    for (std::size_t i : truth.levels[0]) {
      EXPECT_LT((rec.points[i].position - Vec3(1.0, 0.0, 1.45)).norm(), 0.09);
    }
  }
}

TEST(Synth, PipelineReproducesGeneratorLabels) {
  GenerationOptions gen;
  gen.span.outlier_filter = false;
  const auto scene = standard_scene(42, 0.3);
  auto behavior = touring_behavior(scene, 9, 3.0);
  behavior.observation_jitter_m = 0.0;
  const auto rec = generate(scene, behavior, gen);
  const auto aligned = testing::align(rec);
  ASSERT_EQ(aligned.frames.size(), rec.truth.size());
  for (std::size_t f = 0; f < aligned.frames.size(); ++f) {
    const auto& frame = aligned.frames[f];
    const auto& truth = rec.truth[f];
    const auto span = build_multilevel(std::span(&frame, 1), frame.pose, gen.span);
    const auto cells = [&](const std::vector<std::size_t>& idx) {
      std::vector<Keypoint> pts;
      for (std::size_t i : idx) pts.push_back(rec.points[i]);
      return oracle::voxel_cells(pts, frame.pose.translation, gen.span);
    };
    EXPECT_EQ(span.scene.set_cells(), cells(truth.scene)) << "frame " << f;
    for (std::size_t l = 0; l < kNumLevels; ++l) EXPECT_EQ(span.levels[l].set_cells(), cells(truth.levels[l]));
  }
}

TEST(Synth, EveryLevelIsPopulatedInTouringFrames) {
  const auto rec = testing::small_recording(20.0, 42, 1.0);
  std::size_t full = 0;
  for (const auto& t : rec.truth) {
    bool all = true;
    for (const auto& l : t.levels) all = all && !l.empty();
    full += all;
  }
  EXPECT_GE(static_cast<double>(full), 0.99 * static_cast<double>(rec.truth.size()));
}

TEST(Synth, InjectedOutliersAreIsolatedAndFiltered) {
  const auto rec = testing::small_recording(2.0);
  const auto& truth = rec.truth[5];
  std::vector<Keypoint> frame(rec.points.begin() + static_cast<std::ptrdiff_t>(truth.begin),
                              rec.points.begin() + static_cast<std::ptrdiff_t>(truth.end));
  const auto inj = inject_outliers(frame, 0.05, 0.5, 3);
  EXPECT_EQ(inj.injected.size(), static_cast<std::size_t>(std::ceil(0.05 * frame.size())));
  for (std::size_t i : inj.injected) {
    for (const auto& p : frame) EXPECT_GE((p.position - inj.points[i].position).norm(), 0.5);
  }
  const auto kept = filter_outliers(inj.points, SpanConfig{});
  std::size_t kept_injected = 0;
  for (std::size_t i : inj.injected) {
    for (const auto& k : kept) kept_injected += k == inj.points[i];
  }
  EXPECT_LE(static_cast<double>(kept_injected), 0.05 * static_cast<double>(inj.injected.size()));
  EXPECT_GE(static_cast<double>(kept.size() - kept_injected), 0.95 * static_cast<double>(frame.size()));
}

TEST(Synth, ZeroRateInjectionIsIdentity) {
  const std::vector<Keypoint> pts = {{Vec3(1, 2, 3), 0.001, 0.0}};
  const auto inj = inject_outliers(pts, 0.0, 0.5, 1);
  EXPECT_EQ(inj.points, pts);
  EXPECT_TRUE(inj.injected.empty());
  EXPECT_THROW(inject_outliers(pts, 1.5, 0.5, 1), std::invalid_argument);
}

TEST(Synth, InvalidSpecsAreRejected) {
  SceneSpec scene;
  scene.object_clusters.push_back({Vec3(9, 0, 1), 0.1, 10, 0.0});
  EXPECT_THROW(scene.validate(), std::invalid_argument);
  SceneSpec ok;
  BehaviorSpec b;
  b.gaze_program = {{3, 1.0, 0.0}};
  EXPECT_THROW(b.validate(ok), std::invalid_argument);
  EXPECT_THROW(standard_scene(1, 0.0), std::invalid_argument);
}

TEST(Synth, StandardSceneHasAboutFiftyThousandPoints) {
  const auto n = static_points(standard_scene(42, 1.0)).size();
  EXPECT_GT(n, 40000u);
  EXPECT_LT(n, 60000u);
}

TEST(Synth, DynamicObjectFollowsTrajectory) {
  DynamicObject d;
  d.trajectory = {{0.0, Vec3(0, 0, 1)}, {2.0, Vec3(1, 0, 1)}};
  EXPECT_LT((d.position_at(1.0) - Vec3(0.5, 0, 1)).norm(), 1e-12);
  EXPECT_LT((d.position_at(2.5) - d.position_at(0.5)).norm(), 1e-12);
}

}  // namespace
}  // namespace fovs
