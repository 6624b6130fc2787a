#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fovs/cli/app.hpp"
#include "fovs/dataset.hpp"
#include "fovs/forecaster.hpp"
#include "fovs/random.hpp"
#include "fovs/synth.hpp"

namespace fovs::cli {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

const FrameBundle* last_frame_before(const AlignedStreams& s, std::int64_t lo, std::int64_t hi) {
  const FrameBundle* found = nullptr;
  for (const auto& f : s.frames) {
    if (f.frame >= hi) break;
    if (f.frame >= lo) found = &f;
  }
  return found;
}

}  // namespace

StageStats summarize_stage(std::string name, const std::vector<double>& samples_ms) {
  if (samples_ms.empty()) throw std::invalid_argument("summarize_stage: no samples");
  StageStats s;
  s.name = std::move(name);
  const double n = static_cast<double>(samples_ms.size());
  for (double v : samples_ms) s.mean_ms += v;
  s.mean_ms /= n;
  double var = 0.0;
  for (double v : samples_ms) var += (v - s.mean_ms) * (v - s.mean_ms);
  s.std_ms = std::sqrt(var / n);
  std::vector<double> sorted = samples_ms;
  std::sort(sorted.begin(), sorted.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  s.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

LatencyReport run_bench(const BenchOptions& o) {
  SampleSpec spec;
  spec.t_past_s = o.t_past_s;
  spec.t_future_s = o.t_future_s;
  spec.stride_s = o.stride_s;
  spec.frame_duration_s = o.frame_duration_s;
  spec.cfg.cube_length_m = o.cube_length_m;
  spec.cfg.resolution = o.resolution;
  spec.validate();
  const std::size_t total_windows = o.windows + o.warmup;
  if (o.windows == 0) throw std::invalid_argument("bench needs at least one timed window");

  LatencyReport report;
  AlignedStreams streams;
  if (o.points) {
    streams = ingest(*o.points, *o.trajectory, *o.gaze, spec.cfg.frame_quantum_s);
    report.scene_points = 0;
    for (const auto& f : streams.frames) report.scene_points = std::max(report.scene_points, f.points.size());
  } else {
    const auto scene = synth::standard_scene(o.seed, o.density_scale);
    report.scene_points = synth::static_points(scene).size();
    const double duration = spec.t_past_s + static_cast<double>(total_windows) * spec.stride_s + 1.0;
    const auto behavior = synth::touring_behavior(scene, mix_seed(o.seed, 1000), duration);
    synth::GenerationOptions gen;
    gen.frame_quantum_s = spec.cfg.frame_quantum_s;
    gen.span = spec.cfg;
    const auto rec = synth::generate(scene, behavior, gen);
    streams = align_streams(rec.points, rec.poses, rec.gazes, gen.frame_quantum_s);
  }
  if (streams.frames.empty()) throw std::runtime_error("bench: streams contain no frames");

  const Forecaster model = o.checkpoint ? load_checkpoint(*o.checkpoint) : Forecaster(model_config_for(spec));
  if (model.config().resolution != spec.cfg.resolution || model.config().past_frames != spec.past_frames()) {
    throw std::invalid_argument("bench: checkpoint does not match the window geometry");
  }

  // The voxelization stage starts from frames that the online loop has
  // already filtered and classified, so lift every frame up front.
  std::map<std::int64_t, LiftedFrame> lifted;
  for (const auto& f : streams.frames) lifted.emplace(f.frame, lift_frame(f, spec.cfg));

  const std::int64_t past = spec.past_quanta();
  const std::int64_t stride = spec.stride_quanta();
  const std::int64_t fq = spec.frame_quanta();
  const std::int64_t first = streams.frames.front().frame;
  const std::int64_t last = streams.frames.back().frame;

  std::vector<double> pre_ms, loc_ms, vox_ms, inf_ms;
  std::size_t window = 0;
  volatile std::size_t sink = 0;
  for (std::int64_t pred = first + past; pred <= last + 1 && window < total_windows; pred += stride) {
    const std::int64_t start = pred - past;
    const FrameBundle* newest = last_frame_before(streams, start, pred);
    const FrameBundle* anchor_frame = nullptr;
    for (const auto& f : streams.frames) {
      if (f.frame >= start && f.frame < pred) {
        anchor_frame = &f;
        break;
      }
    }
    if (newest == nullptr || anchor_frame == nullptr) continue;
    const Vec3 anchor = anchor_frame->pose.translation;

    const auto t0 = Clock::now();
    const auto selected = select_observed(newest->points, newest->pose, newest->t, spec.cfg);
    const auto t1 = Clock::now();
    const auto membership = classify_levels(selected, newest->pose, newest->gaze.direction, spec.cfg);
    const auto t2 = Clock::now();
    SpanSample sample;
    for (int f = 0; f < spec.past_frames(); ++f) {
      MultiLevelSpan span;
      for (auto& g : span.levels) g = make_grid(anchor, spec.cfg);
      span.scene = make_grid(anchor, spec.cfg);
      for (std::int64_t q = start + f * fq; q < start + (f + 1) * fq; ++q) {
        const auto it = lifted.find(q);
        if (it != lifted.end()) accumulate_lifted(span, it->second, anchor);
      }
      std::array<OccupancyGrid, kInputChannels> channels;
      for (std::size_t l = 0; l < kNumLevels; ++l) channels[l] = std::move(span.levels[l]);
      channels[kSceneChannel] = std::move(span.scene);
      sample.inputs.push_back(std::move(channels));
    }
    for (auto& g : sample.target) g = make_grid(anchor, spec.cfg);
    const auto t3 = Clock::now();
    const Forecast forecast = model.predict(sample);
    const auto t4 = Clock::now();
    sink = sink + membership.inside.size() + forecast.binarized.size();

    if (window++ < o.warmup) continue;
    pre_ms.push_back(elapsed_ms(t0, t1));
    loc_ms.push_back(elapsed_ms(t1, t2));
    vox_ms.push_back(elapsed_ms(t2, t3));
    inf_ms.push_back(elapsed_ms(t3, t4));
  }
  if (pre_ms.size() < o.windows) {
    throw std::runtime_error("bench: streams yield " + std::to_string(pre_ms.size()) + " timed windows, need " +
                             std::to_string(o.windows));
  }

  report.stages = {summarize_stage("point preprocessing", pre_ms),
                   summarize_stage("3D visual span localization", loc_ms),
                   summarize_stage("voxelization", vox_ms), summarize_stage("model inference", inf_ms)};
  for (const auto& s : report.stages) report.total_mean_ms += s.mean_ms;
  report.window_ms = spec.t_past_s * 1000.0;
  report.real_time_factor = report.total_mean_ms / report.window_ms;
  report.windows = pre_ms.size();
  return report;
}

std::string latency_json(const LatencyReport& r) {
  nlohmann::ordered_json j;
  j["windows"] = r.windows;
  j["scene_points"] = r.scene_points;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"stage", s.name}, {"mean_ms", s.mean_ms}, {"std_ms", s.std_ms}, {"p95_ms", s.p95_ms}});
  }
  j["stages"] = stages;
  j["total_mean_ms"] = r.total_mean_ms;
  j["window_ms"] = r.window_ms;
  j["real_time_factor"] = r.real_time_factor;
  return j.dump(2) + "\n";
}

std::string latency_table(const LatencyReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-30s %10s %10s %10s\n", "stage", "mean ms", "std ms", "p95 ms");
  os << line;
  for (const auto& s : r.stages) {
    std::snprintf(line, sizeof line, "%-30s %10.3f %10.3f %10.3f\n", s.name.c_str(), s.mean_ms, s.std_ms, s.p95_ms);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-30s %10.3f\n", "total", r.total_mean_ms);
  os << line;
  std::snprintf(line, sizeof line, "real-time factor %.4f (window %.0f ms, %zu windows, %zu scene points)\n",
                r.real_time_factor, r.window_ms, r.windows, r.scene_points);
  os << line;
  return os.str();
}

}  // namespace fovs::cli
