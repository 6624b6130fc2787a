#include <benchmark/benchmark.h>

#include "fovs/synth.hpp"
#include "fovs/voxel.hpp"

namespace {

using namespace fovs;

// One full-density frame of the standard scene plus its neighbours.
const AlignedStreams& streams() {
  static const AlignedStreams s = [] {
    const auto scene = synth::standard_scene(42, 1.0);
    const auto rec = synth::generate(scene, synth::touring_behavior(scene, 7, 3.0));
    return align_streams(rec.points, rec.poses, rec.gazes, 0.1);
  }();
  return s;
}

const FrameBundle& frame() { return streams().frames[10]; }

std::vector<Vec3> positions(const std::vector<Keypoint>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(p.position);
  return out;
}

void BM_KnnMeanDistances(benchmark::State& state) {
  const auto pts = positions(frame().points);
  const int k = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(knn_mean_distances(pts, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_KnnMeanDistances)->Arg(8)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_FilterOutliers(benchmark::State& state) {
  const SpanConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(filter_outliers(frame().points, cfg));
}
BENCHMARK(BM_FilterOutliers)->Unit(benchmark::kMillisecond);

void BM_SelectObserved(benchmark::State& state) {
  SpanConfig cfg;
  cfg.outlier_filter = false;
  const auto& f = frame();
  for (auto _ : state) benchmark::DoNotOptimize(select_observed(f.points, f.pose, f.t, cfg));
}
BENCHMARK(BM_SelectObserved)->Unit(benchmark::kMillisecond);

void BM_LiftFrame(benchmark::State& state) {
  const SpanConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(lift_frame(frame(), cfg));
}
BENCHMARK(BM_LiftFrame)->Unit(benchmark::kMillisecond);

void BM_Voxelize(benchmark::State& state) {
  const SpanConfig cfg;
  const auto& f = frame();
  for (auto _ : state) benchmark::DoNotOptimize(voxelize(f.points, f.pose, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.points.size()));
}
BENCHMARK(BM_Voxelize)->Unit(benchmark::kMicrosecond);

void BM_BuildMultilevelWindow(benchmark::State& state) {
  const SpanConfig cfg;
  const auto& all = streams().frames;
  const std::span<const FrameBundle> window(all.data(), 20);
  for (auto _ : state) benchmark::DoNotOptimize(build_multilevel(window, cfg));
}
BENCHMARK(BM_BuildMultilevelWindow)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
