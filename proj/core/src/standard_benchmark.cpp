#include "fovs/standard_benchmark.hpp"

#include <cstdio>
#include <stdexcept>

#include "fovs/parallel.hpp"
#include "fovs/random.hpp"
#include "fovs/synth.hpp"

namespace fovs {

std::string benchmark_recording_id(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rec%03zu", r);
  return buf;
}

std::vector<SpanSample> standard_benchmark(const BenchmarkSpec& bench, int workers) {
  bench.spec.validate();
  const std::size_t per_recording = expected_window_count(bench.recording_s, bench.spec);
  if (per_recording == 0) throw std::invalid_argument("benchmark recordings are shorter than one window");

  const synth::SceneSpec scene = synth::standard_scene(bench.scene_seed, bench.density_scale);
  synth::GenerationOptions options;
  options.frame_quantum_s = bench.spec.cfg.frame_quantum_s;
  options.span = bench.spec.cfg;

  std::vector<SpanSample> out;
  std::size_t next = 0;
  while (out.size() < bench.sample_count) {
    // Dropped windows make the yield uneven, so ask for one spare recording.
    const std::size_t missing = bench.sample_count - out.size();
    const std::size_t batch = (missing + per_recording - 1) / per_recording + 1;
    std::vector<std::vector<SpanSample>> produced(batch);
    parallel_for(
        batch,
        [&](std::size_t i) {
          const std::size_t r = next + i;
          const auto behavior = synth::touring_behavior(scene, mix_seed(bench.scene_seed, 1000 + r), bench.recording_s);
          const auto rec = synth::generate(scene, behavior, options);
          const auto aligned = align_streams(rec.points, rec.poses, rec.gazes, options.frame_quantum_s);
          produced[i] = build_samples(aligned, bench.spec, benchmark_recording_id(r));
        },
        workers);
    next += batch;
    bool any = false;
    for (auto& samples : produced) {
      any = any || !samples.empty();
      for (auto& s : samples) {
        if (out.size() == bench.sample_count) break;
        out.push_back(std::move(s));
      }
    }
    if (!any) throw std::runtime_error("benchmark recordings yield no samples");
  }
  return out;
}

}  // namespace fovs
