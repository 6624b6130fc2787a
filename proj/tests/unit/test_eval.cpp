#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "fovs/baselines.hpp"
#include "fovs/evaluate.hpp"
#include "fovs/metrics.hpp"
#include "fovs/projection.hpp"
#include "fovs/random.hpp"
#include "oracles.hpp"

namespace fovs {
namespace {

OccupancyGrid grid_with(std::initializer_list<std::array<int, 3>> cells, int r = 16) {
  OccupancyGrid g(r, 3.2, Vec3(-1.6, -1.6, -1.6));
  for (const auto& c : cells) g.set(c[0], c[1], c[2]);
  return g;
}

OccupancyGrid random_grid(Rng& rng, double fill) {
  OccupancyGrid g(16, 3.2, Vec3(-1.6, -1.6, -1.6));
  for (std::size_t c = 0; c < g.cell_count(); ++c)
    if (rng.uniform() < fill) g.set(c);
  return g;
}

TEST(Metrics, ClosedForms) {
  const auto truth = grid_with({{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 0, 3}});
  const auto pred = grid_with({{0, 0, 0}, {0, 0, 1}, {5, 5, 5}});
  const auto s = grid_metrics(pred, truth);
  EXPECT_DOUBLE_EQ(s.iou, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.f1, 4.0 / 7.0);
  EXPECT_FALSE(s.both_empty);
}

TEST(Metrics, EmptyCases) {
  const auto empty = grid_with({});
  const auto one = grid_with({{1, 2, 3}});
  const auto both = grid_metrics(empty, empty);
  EXPECT_TRUE(both.both_empty);
  EXPECT_EQ(both.iou, 1.0);
  EXPECT_EQ(both.f1, 1.0);
  const auto miss = grid_metrics(empty, one);
  EXPECT_EQ(miss.iou, 0.0);
  EXPECT_EQ(miss.recall, 0.0);
  EXPECT_EQ(miss.precision, 0.0);
  EXPECT_THROW(grid_metrics(one, grid_with({}, 8)), GeometryMismatch);
}

TEST(Metrics, IouNeverExceedsF1) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto s = grid_metrics(random_grid(rng, rng.uniform(0, 0.3)), random_grid(rng, rng.uniform(0, 0.3)));
    EXPECT_LE(s.iou, s.f1 + 1e-15);
    EXPECT_GE(s.iou, 0.0);
  }
}

TEST(Distances, IdenticalAndAdjacent) {
  const auto a = grid_with({{3, 3, 3}, {4, 4, 4}});
  const auto d = foveal_distance_stats(a, a);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->min, 0.0);
  EXPECT_EQ(d->avg, 0.0);
  EXPECT_EQ(d->max, 0.0);
  const auto adj = foveal_distance_stats(grid_with({{3, 3, 3}}), grid_with({{3, 3, 4}}));
  ASSERT_TRUE(adj);
  EXPECT_NEAR(adj->min, 20.0, 1e-9);
  EXPECT_NEAR(adj->max, 20.0, 1e-9);
  EXPECT_FALSE(foveal_distance_stats(grid_with({}), a));
}

TEST(Distances, MatchBruteForceAndAreSymmetric) {
  Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    const auto a = random_grid(rng, 0.01);
    const auto b = random_grid(rng, 0.02);
    const auto got = foveal_distance_stats(a, b);
    const auto want = oracle::distance_stats(a, b);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (!got) continue;
    EXPECT_NEAR(got->min, want->min, 1e-9);
    EXPECT_NEAR(got->avg, want->avg, 1e-9);
    EXPECT_NEAR(got->max, want->max, 1e-9);
    const auto rev = foveal_distance_stats(b, a);
    EXPECT_NEAR(rev->avg, got->avg, 1e-9);
    EXPECT_NEAR(rev->max, got->max, 1e-9);
    EXPECT_LE(got->min, got->avg);
    EXPECT_LE(got->avg, got->max);
  }
}

Forecast single_cell_forecast(const OccupancyGrid& like, std::size_t cell) {
  std::vector<double> soft(like.cell_count(), 0.01);
  soft[cell] = 0.99;
  return make_forecast({SpanLevel::foveal}, soft, like);
}

TEST(Projection, OpticalAxisHitsPrincipalPoint) {
  const CameraModel cam;
  ASSERT_TRUE(project_local(cam, Vec3(0, 0, 2)));
  EXPECT_EQ(*project_local(cam, Vec3(0, 0, 2)), cam.principal_point_px);
  EXPECT_FALSE(project_local(cam, Vec3(0, 0, -1)));
  EXPECT_FALSE(project_local(cam, Vec3(10, 0, 1)));
  EXPECT_NEAR(cam.radius_for_degrees(45.0), 160.0, 1e-9);
}

TEST(Projection, TrackEndsAtTargetCell) {
  const OccupancyGrid g(16, 3.2, Vec3(-1.6, -1.6, -1.6));
  const Pose head = Pose::identity();
  // Cell (8, 8, 13): centre (0.1, 0.1, 1.1).
  const auto f = single_cell_forecast(g, g.linear_index(8, 8, 13));
  const CameraModel cam;
  const auto track = project_to_2d(f, head, cam, GazeSample{Vec3::UnitZ(), 0.0}, 5);
  ASSERT_EQ(track.points.size(), 5u);
  ASSERT_TRUE(track.points.back());
  EXPECT_NEAR(track.points.back()->x(), 160.0 + 160.0 * 0.1 / 1.1, 1e-9);
  EXPECT_NEAR(track.points.back()->y(), 160.0 + 160.0 * 0.1 / 1.1, 1e-9);
  ASSERT_TRUE(track.points.front());
  // Intermediate points move monotonically away from the start gaze.
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GT(track.points[i]->x(), track.points[i - 1]->x());
}

TEST(Projection, BehindCameraAndConstantChannel) {
  const OccupancyGrid g(16, 3.2, Vec3(-1.6, -1.6, -1.6));
  const auto behind = project_to_2d(single_cell_forecast(g, g.linear_index(8, 8, 1)), Pose::identity(), CameraModel{},
                                    GazeSample{}, 3);
  EXPECT_TRUE(behind.target_behind);
  for (const auto& p : behind.points) EXPECT_FALSE(p);
  const auto flat = make_forecast({SpanLevel::foveal}, std::vector<double>(g.cell_count(), 0.3), g);
  EXPECT_THROW(project_to_2d(flat, Pose::identity(), CameraModel{}, GazeSample{}, 3), std::invalid_argument);
}

TEST(Projection, Score2d) {
  const CameraModel cam;
  using P = std::optional<Pixel>;
  const std::vector<P> truth = {Pixel(100, 100), Pixel(110, 100), std::nullopt, Pixel(50, 50)};
  EXPECT_EQ(score_2d(truth, truth, cam).f1, 1.0);
  const std::vector<P> pred = {Pixel(101, 100), Pixel(200, 100), Pixel(1, 1), std::nullopt};
  const auto s = score_2d(pred, truth, cam);
  EXPECT_DOUBLE_EQ(s.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.recall, 1.0 / 3.0);
  const std::vector<P> none(4);
  EXPECT_EQ(score_2d(none, truth, cam).recall, 0.0);
  EXPECT_THROW(score_2d(none, {P{}}, cam), std::invalid_argument);
}

SpanSample frozen_sample(Rng& rng) {
  SpanSample s;
  std::array<OccupancyGrid, kInputChannels> ch;
  for (auto& g : ch) g = random_grid(rng, 0.05);
  for (std::size_t l = 0; l < kNumLevels; ++l) s.target[l] = ch[l];
  s.inputs = {ch, ch};
  return s;
}

TEST(Evaluate, PersistenceOnFrozenSceneIsPerfect) {
  Rng rng(3);
  std::vector<SpanSample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(frozen_sample(rng));
  const auto e = evaluate(baseline_persistence, samples, {0, 1, 2, 3, 4}, "persistence");
  EXPECT_EQ(e.report.sample_count, 5u);
  for (const auto& l : e.report.levels) EXPECT_EQ(l.iou, 1.0);
  ASSERT_TRUE(e.report.foveal_distance_cm);
  EXPECT_EQ(e.report.foveal_distance_cm->avg, 0.0);
}

TEST(Evaluate, AggregateIsMeanOfPerSampleScores) {
  Rng rng(4);
  std::vector<SpanSample> samples;
  for (int i = 0; i < 7; ++i) {
    auto s = frozen_sample(rng);
    for (auto& t : s.target) t = random_grid(rng, 0.05);
    samples.push_back(std::move(s));
  }
  const std::vector<std::size_t> idx = {6, 1, 3};
  const auto e = evaluate(baseline_persistence, samples, idx);
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    double sum = 0.0;
    for (auto i : idx) sum += grid_metrics(*baseline_persistence(samples[i]).grid(kAllLevels[l]), samples[i].target[l]).iou;
    EXPECT_NEAR(e.report.levels[l].iou, sum / 3.0, 1e-15);
  }
  EXPECT_THROW(evaluate(baseline_persistence, samples, {}), std::invalid_argument);
}

TEST(Evaluate, ReportsAreWellFormed) {
  Rng rng(5);
  std::vector<SpanSample> samples = {frozen_sample(rng)};
  const auto e = evaluate(baseline_persistence, samples, {0}, "p");
  const auto csv = report_csv(e.report);
  EXPECT_NE(csv.find("foveal,iou,"), std::string::npos);
  const auto j = nlohmann::json::parse(report_json(e.report));
  EXPECT_EQ(j["source"], "p");
  EXPECT_EQ(j["sample_count"], 1);
}

}  // namespace
}  // namespace fovs
