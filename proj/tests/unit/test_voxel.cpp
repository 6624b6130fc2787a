#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "fovs/voxel.hpp"
#include "oracles.hpp"

namespace fovs {
namespace {

using testing::random_window;

OccupancyGrid random_grid(Rng& rng, int r, double fill, const Vec3& origin = Vec3::Zero()) {
  OccupancyGrid g(r, 3.2, origin);
  for (std::size_t c = 0; c < g.cell_count(); ++c)
    if (rng.uniform() < fill) g.set(c);
  return g;
}

TEST(Grid, LinearIndexIsXMajor) {
  OccupancyGrid g(4, 1.0, Vec3::Zero());
  EXPECT_EQ(g.linear_index(1, 2, 3), (1u * 4 + 2) * 4 + 3);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto ijk = g.cell_of(c);
    EXPECT_EQ(g.linear_index(ijk[0], ijk[1], ijk[2]), c);
  }
  EXPECT_EQ(g.cell_center(0, 0, 0), Vec3(0.125, 0.125, 0.125));
}

TEST(Grid, SetTestCountAndClear) {
  OccupancyGrid g(16, 3.2, Vec3::Zero());
  EXPECT_TRUE(g.empty());
  g.set(0, 0, 0);
  g.set(15, 15, 15);
  g.set(15, 15, 15);
  EXPECT_EQ(g.count(), 2u);
  EXPECT_TRUE(g.test(15, 15, 15));
  EXPECT_EQ(g.set_cells(), (std::vector<std::size_t>{0, 4095}));
  g.clear();
  EXPECT_TRUE(g.empty());
}

TEST(Grid, ConstructorRejectsBadGeometry) {
  EXPECT_THROW(OccupancyGrid(0, 1.0, Vec3::Zero()), std::invalid_argument);
  EXPECT_THROW(OccupancyGrid(4, 0.0, Vec3::Zero()), std::invalid_argument);
}

TEST(Grid, SetOperationsMatchCellwiseDefinitions) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_grid(rng, 16, 0.1);
    const auto b = random_grid(rng, 16, 0.3);
    const auto u = grid_union(a, b);
    const auto n = grid_intersection(a, b);
    std::size_t overlap = 0;
    for (std::size_t c = 0; c < a.cell_count(); ++c) {
      EXPECT_EQ(u.test(c), a.test(c) || b.test(c));
      EXPECT_EQ(n.test(c), a.test(c) && b.test(c));
      overlap += a.test(c) && b.test(c);
    }
    EXPECT_EQ(grid_overlap(a, b), overlap);
    EXPECT_EQ(grid_count(n), overlap);
    EXPECT_TRUE(a.subset_of(u));
    EXPECT_TRUE(n.subset_of(a));
    EXPECT_EQ(grid_union(a, b), grid_union(b, a));
  }
}

TEST(Grid, MismatchedGeometryThrows) {
  OccupancyGrid a(16, 3.2, Vec3::Zero());
  EXPECT_THROW(grid_union(a, OccupancyGrid(8, 3.2, Vec3::Zero())), GeometryMismatch);
  EXPECT_THROW(grid_overlap(a, OccupancyGrid(16, 3.0, Vec3::Zero())), GeometryMismatch);
  EXPECT_THROW(a |= OccupancyGrid(16, 3.2, Vec3(0, 0, 0.1)), GeometryMismatch);
  EXPECT_FALSE(a.same_geometry(OccupancyGrid(16, 3.2, Vec3(0.1, 0, 0))));
}

TEST(Voxelize, HalfOpenCells) {
  SpanConfig cfg;
  cfg.cube_length_m = 1.6;
  cfg.resolution = 8;  // edge 0.2
  const Pose anchor = Pose::identity();
  // Interior face x = 0 goes to the higher cell; the upper domain face is dropped.
  std::vector<Keypoint> pts = {{Vec3(0.0, 0.05, 0.05), 0, 0}, {Vec3(0.8, 0.0, 0.0), 0, 0},
                               {Vec3(-0.8, -0.8, -0.8), 0, 0}};
  const auto g = voxelize(pts, anchor, cfg);
  EXPECT_EQ(g.count(), 2u);
  EXPECT_TRUE(g.test(4, 4, 4));
  EXPECT_TRUE(g.test(0, 0, 0));
  EXPECT_EQ(g.origin(), Vec3(-0.8, -0.8, -0.8));
}

TEST(Voxelize, MatchesIntervalOracle) {
  SpanConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = random_window(seed + 70, 3000, cfg);
    const auto g = voxelize(w.points, w.pose, cfg);
    EXPECT_EQ(g.set_cells(), oracle::voxel_cells(w.points, w.pose.translation, cfg));
  }
}

TEST(Voxelize, LocateCellAgreesWithVoxelize) {
  SpanConfig cfg;
  const auto w = random_window(3, 500, cfg);
  auto g = make_grid(w.pose.translation, cfg);
  for (const auto& p : w.points) {
    std::size_t c = 0;
    const bool in = locate_cell(g, p.position, w.pose.translation, c);
    const auto o = oracle::cell_of(p.position, w.pose.translation, cfg.cube_length_m, cfg.resolution);
    ASSERT_EQ(in, o.has_value());
    if (in) {
      EXPECT_EQ(c, *o);
    }
  }
}

std::vector<FrameBundle> random_frames(std::uint64_t seed, int count, const SpanConfig& cfg) {
  std::vector<FrameBundle> frames;
  Rng rng(seed);
  for (int f = 0; f < count; ++f) {
    auto w = random_window(rng.next_u64(), 800, cfg);
    FrameBundle b;
    b.frame = frame_index(w.t, cfg.frame_quantum_s);
    b.t = w.t;
    b.pose = w.pose;
    b.gaze.direction = w.gaze;
    b.gaze.at = w.t;
    b.points = std::move(w.points);
    frames.push_back(std::move(b));
  }
  return frames;
}

TEST(Multilevel, MatchesPerFrameOracleAndNests) {
  SpanConfig cfg;
  const auto frames = random_frames(17, 4, cfg);
  LiftDiagnostics diag;
  const auto span = build_multilevel(frames, cfg, &diag);
  EXPECT_EQ(diag.frames, 4u);
  const Vec3 anchor = frames.front().pose.translation;
  std::array<std::vector<Keypoint>, kNumLevels> level_pts;
  std::vector<Keypoint> scene_pts;
  for (const auto& f : frames) {
    const auto sel = oracle::select_observed(f.points, f.pose, f.t, cfg);
    scene_pts.insert(scene_pts.end(), sel.begin(), sel.end());
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      const Vec3 axis = l + 1 < kNumLevels ? f.gaze.direction : Vec3::UnitZ();
      const auto in = oracle::classify_span(sel, f.pose, axis, cfg.eccentricities_deg[l]);
      level_pts[l].insert(level_pts[l].end(), in.begin(), in.end());
    }
  }
  EXPECT_EQ(span.scene.set_cells(), oracle::voxel_cells(scene_pts, anchor, cfg));
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    EXPECT_EQ(span.levels[l].set_cells(), oracle::voxel_cells(level_pts[l], anchor, cfg));
    EXPECT_TRUE(span.levels[l].subset_of(span.scene));
  }
  EXPECT_TRUE(span.level(SpanLevel::foveal).subset_of(span.level(SpanLevel::central)));
  EXPECT_TRUE(span.level(SpanLevel::central).subset_of(span.level(SpanLevel::peripheral)));
}

TEST(Multilevel, LiftedAccumulationEqualsDirect) {
  SpanConfig cfg;
  const auto frames = random_frames(23, 3, cfg);
  const Vec3 anchor = frames[1].pose.translation;
  MultiLevelSpan a, b;
  for (auto* s : {&a, &b}) {
    for (auto& g : s->levels) g = make_grid(anchor, cfg);
    s->scene = make_grid(anchor, cfg);
  }
  for (const auto& f : frames) {
    accumulate_frame(a, f, anchor, cfg);
    accumulate_lifted(b, lift_frame(f, cfg), anchor);
  }
  EXPECT_EQ(a.scene, b.scene);
  for (std::size_t l = 0; l < kNumLevels; ++l) EXPECT_EQ(a.levels[l], b.levels[l]);
}

TEST(Multilevel, EmptyWindowThrows) {
  std::vector<FrameBundle> none;
  EXPECT_THROW(build_multilevel(none, SpanConfig{}), std::invalid_argument);
}

}  // namespace
}  // namespace fovs
