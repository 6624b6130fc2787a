#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "fovs/geometry.hpp"
#include "oracles.hpp"

namespace fovs {
namespace {

using testing::random_rotation;
using testing::random_window;

TEST(Pose, LocalWorldRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose p{random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal()), 0.0};
    const Vec3 w(rng.normal(), rng.normal(), rng.normal());
    EXPECT_LT((p.to_world(p.to_local(w)) - w).norm(), 1e-12);
    EXPECT_LT((p.inverse().to_world(w) - p.to_local(w)).norm(), 1e-12);
  }
}

TEST(Pose, ComposeAppliesRightOperandFirst) {
  Rng rng(2);
  const Pose a{random_rotation(rng), Vec3(1, 2, 3), 0.0};
  const Pose b{random_rotation(rng), Vec3(-1, 0.5, 2), 1.0};
  const Vec3 x(0.3, -0.2, 0.9);
  EXPECT_LT((a.compose(b).to_world(x) - a.to_world(b.to_world(x))).norm(), 1e-12);
}

TEST(Pose, ValidateRejectsNonUnitQuaternion) {
  Pose p;
  p.rotation = Quat(1.1, 0, 0, 0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.rotation = Quat::Identity();
  EXPECT_NO_THROW(p.validate());
}

TEST(FrameIndex, RoundsToNearestQuantum) {
  EXPECT_EQ(frame_index(0.0, 0.1), 0);
  EXPECT_EQ(frame_index(0.149, 0.1), 1);
  EXPECT_EQ(frame_index(0.151, 0.1), 2);
  EXPECT_EQ(frame_index(-0.26, 0.1), -3);
}

TEST(SpanConfig, ValidationRejectsBadValues) {
  SpanConfig c;
  EXPECT_NO_THROW(c.validate());
  c.resolution = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SpanConfig{};
  c.eccentricities_deg = {2.0, 2.0, 30.0, 55.0};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SpanConfig{};
  c.cube_length_m = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Knn, MatchesBruteForceOnClusteredData) {
  SpanConfig cfg;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto w = random_window(seed, 600, cfg);
    std::vector<Vec3> pts;
    for (const auto& k : w.points) pts.push_back(k.position);
    for (int k : {1, 3, 8, 12, 16, 20, 32}) {
      EXPECT_EQ(knn_mean_distances(pts, k), oracle::knn_means(pts, k)) << "seed " << seed << " k " << k;
    }
  }
}

TEST(Knn, LatticeWithManyTies) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      for (int k = 0; k < 9; ++k) pts.emplace_back(0.1 * i, 0.1 * j, 0.1 * k);
  for (int k : {6, 16, 26}) EXPECT_EQ(knn_mean_distances(pts, k), oracle::knn_means(pts, k));
}

TEST(Knn, RejectsTooFewPoints) {
  std::vector<Vec3> pts(5, Vec3::Zero());
  EXPECT_THROW(knn_mean_distances(pts, 5), std::invalid_argument);
  EXPECT_THROW(knn_mean_distances(pts, 0), std::invalid_argument);
}

TEST(OutlierFilter, RemovesIsolatedPointKeepsCluster) {
  Rng rng(3);
  std::vector<Keypoint> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05)), 0, 0});
  pts.push_back({Vec3(1.2, 0, 0), 0, 0});
  const auto kept = filter_outliers(pts, SpanConfig{});
  ASSERT_FALSE(kept.empty());
  for (const auto& k : kept) EXPECT_LT(k.position.norm(), 1.0);
  EXPECT_GT(kept.size(), 180u);
}

TEST(OutlierFilter, SmallSetsPassThrough) {
  std::vector<Keypoint> pts;
  for (int i = 0; i < 16; ++i) pts.push_back({Vec3(i * i, 0, 0), 0, 0});
  EXPECT_EQ(filter_outliers(pts, SpanConfig{}), pts);
}

TEST(OutlierFilter, UniformLatticeKeepsEverything) {
  std::vector<Keypoint> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) pts.push_back({Vec3(i, j, 0), 0, 0});
  // Corners and edges have larger means but stay below mean + 2 std.
  const auto kept = filter_outliers(pts, SpanConfig{});
  EXPECT_EQ(kept, oracle::filter_outliers(pts, SpanConfig{}));
}

TEST(OutlierFilter, KeptIsOrderedSubset) {
  SpanConfig cfg;
  const auto w = random_window(11, 1500, cfg);
  const auto kept = filter_outliers(w.points, cfg);
  std::size_t j = 0;
  for (const auto& k : kept) {
    while (j < w.points.size() && !(w.points[j] == k)) ++j;
    ASSERT_LT(j, w.points.size());
    ++j;
  }
}

TEST(SelectObserved, MatchesOracle) {
  SpanConfig cfg;
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto w = random_window(seed, 2000, cfg);
    EXPECT_EQ(select_observed(w.points, w.pose, w.t, cfg), oracle::select_observed(w.points, w.pose, w.t, cfg));
  }
  cfg.outlier_filter = false;
  const auto w = random_window(99, 2000, cfg);
  EXPECT_EQ(select_observed(w.points, w.pose, w.t, cfg), oracle::select_observed(w.points, w.pose, w.t, cfg));
}

TEST(SelectObserved, CubeBoundaryIsExclusive) {
  SpanConfig cfg;
  cfg.outlier_filter = false;
  const Pose pose = Pose::identity(0.0);
  std::vector<Keypoint> pts = {{Vec3(1.6, 0, 0), 0, 0}, {Vec3(1.599, 0, 0), 0, 0}, {Vec3(3.2, 0, 0), 0, 0},
                               {Vec3(0, -1.6, 0), 0, 0}};
  const auto sel = select_observed(pts, pose, 0.0, cfg);
  ASSERT_EQ(sel.size(), 1u);
  EXPECT_EQ(sel[0].position, Vec3(1.599, 0, 0));
}

TEST(SelectObserved, OtherFramesAreIgnored) {
  SpanConfig cfg;
  cfg.outlier_filter = false;
  std::vector<Keypoint> pts = {{Vec3(0.1, 0, 0), 0, 0.04}, {Vec3(0.2, 0, 0), 0, 0.06}, {Vec3(0.3, 0, 0), 0, -0.05}};
  const auto sel = select_observed(pts, Pose::identity(0.0), 0.0, cfg);
  ASSERT_EQ(sel.size(), 1u);
  EXPECT_EQ(sel[0].position.x(), 0.1);
}

TEST(SelectObserved, PoseTimeMismatchThrows) {
  SpanConfig cfg;
  std::vector<Keypoint> pts;
  EXPECT_THROW(select_observed(pts, Pose::identity(1.0), 0.0, cfg), std::invalid_argument);
  EXPECT_NO_THROW(select_observed(pts, Pose::identity(0.05), 0.0, cfg));
}

TEST(Classify, ConeBoundaryAndDiagnostics) {
  const Pose pose = Pose::identity();
  const double a = 10.0 * std::numbers::pi / 180.0;
  std::vector<Keypoint> pts = {
      {Vec3(std::sin(a * 0.99), 0, std::cos(a * 0.99)), 0, 0},
      {Vec3(std::sin(a * 1.01), 0, std::cos(a * 1.01)), 0, 0},
      {Vec3::Zero(), 0, 0},
      {Vec3(0, 0, -1), 0, 0},
  };
  ClassifyDiagnostics diag;
  const auto in = classify_span(pts, pose, Vec3::UnitZ(), 10.0, &diag);
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0], pts[0]);
  EXPECT_EQ(diag.zero_length, 1u);
}

TEST(Classify, RejectsBadArguments) {
  std::vector<Keypoint> pts;
  EXPECT_THROW(classify_span(pts, Pose::identity(), Vec3::UnitZ(), 0.0), std::invalid_argument);
  EXPECT_THROW(classify_span(pts, Pose::identity(), Vec3::UnitZ(), 180.0), std::invalid_argument);
  EXPECT_THROW(classify_span(pts, Pose::identity(), Vec3::Zero(), 10.0), std::invalid_argument);
}

TEST(Classify, MatchesOracleUnderRotation) {
  SpanConfig cfg;
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto w = random_window(seed, 3000, cfg);
    for (double theta : {2.0, 8.0, 30.0, 55.0, 120.0}) {
      EXPECT_EQ(classify_span(w.points, w.pose, w.gaze, theta), oracle::classify_span(w.points, w.pose, w.gaze, theta));
    }
  }
}

TEST(Classify, LevelsAgreeWithPerLevelCalls) {
  SpanConfig cfg;
  const auto w = random_window(7, 3000, cfg);
  const auto m = classify_levels(w.points, w.pose, w.gaze, cfg);
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    const Vec3 axis = l + 1 < kNumLevels ? w.gaze : Vec3::UnitZ();
    const auto expected = classify_span(w.points, w.pose, axis, cfg.eccentricities_deg[l]);
    std::vector<Keypoint> got;
    for (std::size_t i = 0; i < w.points.size(); ++i)
      if (m.inside[i][l]) got.push_back(w.points[i]);
    EXPECT_EQ(got, expected) << level_name(kAllLevels[l]);
  }
  EXPECT_EQ(m.zero_length, 1u);
}

TEST(Classify, GazeLevelsNest) {
  SpanConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = random_window(seed + 500, 1000, cfg);
    const auto m = classify_levels(w.points, w.pose, w.gaze, cfg);
    for (const auto& f : m.inside) {
      EXPECT_TRUE(!f[0] || f[1]);
      EXPECT_TRUE(!f[1] || f[2]);
    }
  }
}

TEST(Align, NearestTimestampTiesGoEarlier) {
  const std::vector<double> t = {0.0, 0.1, 0.2};
  EXPECT_EQ(nearest_timestamp(t, 0.05), 0u);
  EXPECT_EQ(nearest_timestamp(t, 0.16), 2u);
  EXPECT_EQ(nearest_timestamp(t, -1.0), 0u);
  EXPECT_EQ(nearest_timestamp(t, 9.0), 2u);
  EXPECT_EQ(nearest_timestamp({}, 0.0), static_cast<std::size_t>(-1));
}

TEST(Align, OffsetStreamsAndDroppedFrames) {
  std::vector<Keypoint> pts = {{Vec3(0, 0, 1), 0, 0.0}, {Vec3(0, 0, 1), 0, 0.1}, {Vec3(0, 0, 1), 0, 0.5}};
  std::vector<Pose> poses = {Pose::identity(0.025), Pose::identity(0.125)};
  std::vector<GazeSample> gazes = {{Vec3::UnitZ(), 0.1}, {Vec3::UnitZ(), 0.0}};
  const auto a = align_streams(pts, poses, gazes, 0.1);
  ASSERT_EQ(a.frames.size(), 2u);
  EXPECT_EQ(a.frames[0].frame, 0);
  EXPECT_EQ(a.frames[0].pose.at, 0.025);
  EXPECT_EQ(a.frames[0].gaze.at, 0.0);
  EXPECT_EQ(a.frames[1].gaze.at, 0.1);
  ASSERT_EQ(a.dropped.size(), 1u);
  EXPECT_EQ(a.dropped[0].frame, 5);
  EXPECT_TRUE(a.dropped[0].missing_pose);
  EXPECT_TRUE(a.dropped[0].missing_gaze);
}

TEST(LookRotation, ForwardIsLocalZAndDownIsLocalY) {
  const Vec3 f = Vec3(1, 2, 0.3).normalized();
  const Quat q = look_rotation(f);
  EXPECT_LT((q * Vec3::UnitZ() - f).norm(), 1e-12);
  EXPECT_LT((q * Vec3::UnitY()).z(), 0.0);
  const Quat up = look_rotation(Vec3::UnitZ());
  EXPECT_LT((up * Vec3::UnitZ() - Vec3::UnitZ()).norm(), 1e-12);
}

TEST(Levels, NamesRoundTrip) {
  for (auto l : kAllLevels) EXPECT_EQ(parse_level(level_name(l)), l);
  EXPECT_THROW(parse_level("macular"), std::invalid_argument);
}

}  // namespace
}  // namespace fovs
