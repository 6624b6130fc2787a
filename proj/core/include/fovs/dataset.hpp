#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fovs/geometry.hpp"
#include "fovs/voxel.hpp"

namespace fovs {

/// Malformed input file or archive.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Text stream files
//
//   points:     t_sec,x,y,z,inv_dist_var
//   trajectory: t_sec,qw,qx,qy,qz,tx,ty,tz   (local -> world, z forward)
//   gaze:       t_sec,gx,gy,gz               (unit vector, local frame)
//
// One row per line, '#' starts a comment, blank lines are ignored.
// ---------------------------------------------------------------------------

struct RawStreams {
  std::vector<Keypoint> points;
  std::vector<Pose> poses;
  std::vector<GazeSample> gazes;
};

struct IngestReport {
  std::vector<std::string> warnings;
};

std::vector<Keypoint> read_points(const std::filesystem::path& path);
/// Rejects non-monotonic timestamps and quaternions whose norm is off by more
/// than 1e-3; smaller deviations are renormalised (with a warning above 1e-6).
std::vector<Pose> read_trajectory(const std::filesystem::path& path, IngestReport* report = nullptr);
std::vector<GazeSample> read_gaze(const std::filesystem::path& path, IngestReport* report = nullptr);

void write_points(const std::filesystem::path& path, const std::vector<Keypoint>& points);
void write_trajectory(const std::filesystem::path& path, const std::vector<Pose>& poses);
void write_gaze(const std::filesystem::path& path, const std::vector<GazeSample>& gazes);

RawStreams read_streams(const std::filesystem::path& points_file,
                        const std::filesystem::path& trajectory_file,
                        const std::filesystem::path& gaze_file, IngestReport* report = nullptr);

/// Reads and validates the three stream files and aligns them into frames.
AlignedStreams ingest(const std::filesystem::path& points_file,
                      const std::filesystem::path& trajectory_file,
                      const std::filesystem::path& gaze_file, double frame_quantum,
                      IngestReport* report = nullptr);

// ---------------------------------------------------------------------------
// Sliding-window samples
// ---------------------------------------------------------------------------

inline constexpr std::size_t kInputChannels = kNumLevels + 1;  // 4 levels + scene
inline constexpr std::size_t kSceneChannel = kNumLevels;

struct SampleSpec {
  double t_past_s = 2.0;
  double t_future_s = 2.0;
  double stride_s = 1.0;
  double frame_duration_s = 1.0;
  SpanConfig cfg;

  void validate() const;
  int past_frames() const;  // T_p
  std::int64_t past_quanta() const;
  std::int64_t future_quanta() const;
  std::int64_t stride_quanta() const;
  std::int64_t frame_quanta() const;

  bool operator==(const SampleSpec&) const = default;
};

/// Skilled-activity defaults: 4 s horizon.
SampleSpec skilled_activity_spec();

struct SpanSample {
  /// inputs[f][c]: input frame f, channel c in (foveal, central, peripheral,
  /// orientation, scene).
  std::vector<std::array<OccupancyGrid, kInputChannels>> inputs;
  /// Per-level union over the future window.
  std::array<OccupancyGrid, kNumLevels> target;
  /// Last observed head pose and gaze before the prediction time.
  Pose anchor;
  GazeSample current_gaze;
  std::string recording_id;
  double sample_time = 0.0;

  const Vec3& grid_origin() const { return target[0].origin(); }
  bool operator==(const SpanSample& o) const;
};

struct BuildReport {
  std::size_t windows = 0;
  std::size_t dropped_empty_future = 0;
};

/// Number of windows a recording of the given duration yields before dropping:
/// 1 + floor((L - t_past - t_future) / stride), or 0 when too short.
std::size_t expected_window_count(double duration_s, const SampleSpec& spec);

/// Duration spanned by the aligned frames (last - first + one quantum).
double recording_duration(const AlignedStreams& streams);

/// One sample per stride; samples whose future scene channel is empty are
/// dropped and counted in the report.
std::vector<SpanSample> build_samples(const AlignedStreams& streams, const SampleSpec& spec,
                                      const std::string& recording_id = "rec0",
                                      BuildReport* report = nullptr);

/// Input grids for the window ending at `prediction_frame` (exclusive), using
/// only frames strictly before it. Anchored at the first frame of the window.
std::vector<std::array<OccupancyGrid, kInputChannels>> build_inputs(const AlignedStreams& streams,
                                                                    const SampleSpec& spec,
                                                                    std::int64_t prediction_frame);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class SplitKind { by_recording_tag, random_stratified };

struct SplitPolicy {
  SplitKind kind = SplitKind::random_stratified;
  /// recording id -> tag (by_recording_tag only).
  std::map<std::string, std::string> tags;
  std::string holdout_tag;
  double val_fraction = 0.1;
  double test_fraction = 0.1;  // random_stratified only
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Disjoint cover of sample indices. Strata are recording ids.
Split split(const std::vector<SpanSample>& samples, const SplitPolicy& policy);

// ---------------------------------------------------------------------------
// Binary archive (little-endian, magic "FOVS")
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kArchiveVersion = 1;

struct Archive {
  SampleSpec spec;
  std::vector<SpanSample> samples;
};

void write_archive(const std::filesystem::path& path, const SampleSpec& spec,
                   const std::vector<SpanSample>& samples);
/// Throws FormatError on bad magic, unsupported version, truncation or grids
/// that disagree with the stored spec. Nothing is returned on failure.
Archive read_archive(const std::filesystem::path& path);

/// Serialised size of one sample in bytes.
std::size_t archive_sample_bytes(const SampleSpec& spec, std::size_t recording_id_length);

}  // namespace fovs
