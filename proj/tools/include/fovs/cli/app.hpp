#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fovs::cli {

/// Runs the command line `args` (without the program name). Returns the exit
/// status: 0 on success, 1 on a runtime failure, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct StageStats {
  std::string name;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double p95_ms = 0.0;
};

StageStats summarize_stage(std::string name, const std::vector<double>& samples_ms);

struct LatencyReport {
  /// Point preprocessing, span localization, voxelization, model inference.
  std::vector<StageStats> stages;
  double total_mean_ms = 0.0;
  double window_ms = 2000.0;
  double real_time_factor = 0.0;
  std::size_t windows = 0;
  std::size_t scene_points = 0;
};

struct BenchOptions {
  /// Streams to replay; the standard scene is generated when unset.
  std::optional<std::filesystem::path> points, trajectory, gaze;
  std::optional<std::filesystem::path> checkpoint;
  std::uint64_t seed = 42;
  double density_scale = 1.0;
  std::size_t windows = 100;
  std::size_t warmup = 5;
  double frame_duration_s = 1.0;
  double t_past_s = 2.0;
  double t_future_s = 2.0;
  double stride_s = 1.0;
  double cube_length_m = 3.2;
  int resolution = 16;
};

/// Times the four pipeline stages on one thread. Throws when the streams
/// yield fewer than warmup + windows windows.
LatencyReport run_bench(const BenchOptions& options);

std::string latency_json(const LatencyReport& report);
std::string latency_table(const LatencyReport& report);

}  // namespace fovs::cli
