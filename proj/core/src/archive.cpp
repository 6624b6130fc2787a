#include <cstring>

#include "binary_io.hpp"
#include "fovs/dataset.hpp"

namespace fovs {
namespace {

constexpr char kMagic[4] = {'F', 'O', 'V', 'S'};

void put_spec(detail::ByteWriter& w, const SampleSpec& s) {
  w.put(s.t_past_s);
  w.put(s.t_future_s);
  w.put(s.stride_s);
  w.put(s.frame_duration_s);
  w.put(s.cfg.cube_length_m);
  w.put(static_cast<std::uint32_t>(s.cfg.resolution));
  for (double e : s.cfg.eccentricities_deg) w.put(e);
  w.put(static_cast<std::uint32_t>(s.cfg.outlier_neighbors));
  w.put(s.cfg.outlier_std_ratio);
  w.put(static_cast<std::uint8_t>(s.cfg.outlier_filter ? 1 : 0));
  w.put(s.cfg.frame_quantum_s);
}

SampleSpec get_spec(detail::ByteReader& r) {
  SampleSpec s;
  s.t_past_s = r.get<double>();
  s.t_future_s = r.get<double>();
  s.stride_s = r.get<double>();
  s.frame_duration_s = r.get<double>();
  s.cfg.cube_length_m = r.get<double>();
  s.cfg.resolution = static_cast<int>(r.get<std::uint32_t>());
  for (double& e : s.cfg.eccentricities_deg) e = r.get<double>();
  s.cfg.outlier_neighbors = static_cast<int>(r.get<std::uint32_t>());
  s.cfg.outlier_std_ratio = r.get<double>();
  s.cfg.outlier_filter = r.get<std::uint8_t>() != 0;
  s.cfg.frame_quantum_s = r.get<double>();
  return s;
}

void put_pose(detail::ByteWriter& w, const Pose& p) {
  w.put(p.at);
  w.put(p.rotation.w());
  w.put(p.rotation.x());
  w.put(p.rotation.y());
  w.put(p.rotation.z());
  w.put(p.translation.x());
  w.put(p.translation.y());
  w.put(p.translation.z());
}

Pose get_pose(detail::ByteReader& r) {
  Pose p;
  p.at = r.get<double>();
  const double qw = r.get<double>();
  const double qx = r.get<double>();
  const double qy = r.get<double>();
  const double qz = r.get<double>();
  p.rotation = Quat(qw, qx, qy, qz);
  p.translation.x() = r.get<double>();
  p.translation.y() = r.get<double>();
  p.translation.z() = r.get<double>();
  return p;
}

void put_grid(detail::ByteWriter& w, const OccupancyGrid& g) {
  for (auto word : g.words()) w.put(word);
}

void get_grid(detail::ByteReader& r, OccupancyGrid& g) {
  for (auto& word : g.words()) word = r.get<std::uint64_t>();
}

}  // namespace

std::size_t archive_sample_bytes(const SampleSpec& spec, std::size_t recording_id_length) {
  const std::size_t cells = static_cast<std::size_t>(spec.cfg.resolution) * spec.cfg.resolution * spec.cfg.resolution;
  const std::size_t grid_bytes = (cells + 63) / 64 * 8;
  const std::size_t grids = static_cast<std::size_t>(spec.past_frames()) * kInputChannels + kNumLevels;
  return 8 * 8 + 4 * 8 + 3 * 8 + 8 + 2 + recording_id_length + grids * grid_bytes;
}

void write_archive(const std::filesystem::path& path, const SampleSpec& spec,
                   const std::vector<SpanSample>& samples) {
  spec.validate();
  const auto tp = static_cast<std::size_t>(spec.past_frames());
  detail::ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(kArchiveVersion);
  put_spec(w, spec);
  w.put(static_cast<std::uint32_t>(tp));
  w.put(static_cast<std::uint64_t>(samples.size()));
  for (const auto& s : samples) {
    if (s.inputs.size() != tp) throw std::invalid_argument("write_archive: sample has wrong frame count");
    const Vec3 origin = s.grid_origin();
    for (const auto& frame : s.inputs) {
      for (const auto& g : frame) {
        if (g.resolution() != spec.cfg.resolution || g.cube_length() != spec.cfg.cube_length_m ||
            g.origin() != origin) {
          throw GeometryMismatch("write_archive: grid geometry disagrees with the sample spec");
        }
      }
    }
    for (const auto& g : s.target) {
      if (g.resolution() != spec.cfg.resolution || g.cube_length() != spec.cfg.cube_length_m ||
          g.origin() != origin) {
        throw GeometryMismatch("write_archive: grid geometry disagrees with the sample spec");
      }
    }
    put_pose(w, s.anchor);
    w.put(s.current_gaze.at);
    w.put(s.current_gaze.direction.x());
    w.put(s.current_gaze.direction.y());
    w.put(s.current_gaze.direction.z());
    w.put(origin.x());
    w.put(origin.y());
    w.put(origin.z());
    w.put(s.sample_time);
    w.put_string(s.recording_id);
    for (const auto& frame : s.inputs) {
      for (const auto& g : frame) put_grid(w, g);
    }
    for (const auto& g : s.target) put_grid(w, g);
  }
  detail::write_file_bytes(path, w.bytes());
}

Archive read_archive(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes.data(), bytes.size(), path.string());
  char magic[4];
  r.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw FormatError(path.string() + ": bad archive magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kArchiveVersion) {
    throw FormatError(path.string() + ": unsupported archive version " + std::to_string(version));
  }
  Archive a;
  a.spec = get_spec(r);
  try {
    a.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": invalid sample spec: " + e.what());
  }
  const auto tp = r.get<std::uint32_t>();
  if (static_cast<int>(tp) != a.spec.past_frames()) {
    throw FormatError(path.string() + ": frame count disagrees with the sample spec");
  }
  const auto count = r.get<std::uint64_t>();
  if (count > bytes.size()) throw FormatError(path.string() + ": implausible sample count");

  std::vector<SpanSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t n = 0; n < count; ++n) {
    SpanSample s;
    s.anchor = get_pose(r);
    s.current_gaze.at = r.get<double>();
    s.current_gaze.direction.x() = r.get<double>();
    s.current_gaze.direction.y() = r.get<double>();
    s.current_gaze.direction.z() = r.get<double>();
    Vec3 origin;
    origin.x() = r.get<double>();
    origin.y() = r.get<double>();
    origin.z() = r.get<double>();
    s.sample_time = r.get<double>();
    s.recording_id = r.get_string();
    const OccupancyGrid blank(a.spec.cfg.resolution, a.spec.cfg.cube_length_m, origin);
    s.inputs.resize(tp);
    for (auto& frame : s.inputs) {
      for (auto& g : frame) {
        g = blank;
        get_grid(r, g);
      }
    }
    for (auto& g : s.target) {
      g = blank;
      get_grid(r, g);
    }
    samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after last sample");
  a.samples = std::move(samples);
  return a;
}

}  // namespace fovs
