#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "fovs/dataset.hpp"

namespace fovs {
namespace {

// Parses comma-separated doubles; returns false on any malformed field.
bool parse_row(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) comma = line.size();
    std::string_view field = line.substr(pos, comma - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || end != field.data() + field.size() || field.empty() || !std::isfinite(v)) {
      return false;
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return true;
}

template <typename Fn>
void for_each_row(const std::filesystem::path& path, std::size_t columns, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    if (view.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    if (!parse_row(view, values) || values.size() != columns) {
      std::ostringstream os;
      os << path.string() << ":" << line_no << ": malformed row (expected " << columns
         << " numeric fields)";
      throw FormatError(os.str());
    }
    fn(values, line_no);
  }
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

// Norm check shared by quaternions and gaze directions.
double checked_norm(double norm, const std::filesystem::path& path, std::size_t line_no,
                    const char* what, IngestReport* report) {
  const double dev = std::abs(norm - 1.0);
  if (dev > 1e-3) {
    throw FormatError(where(path, line_no) + ": " + what + " norm " + std::to_string(norm) +
                      " is not unit");
  }
  if (dev > 1e-6 && report != nullptr) {
    report->warnings.push_back(where(path, line_no) + ": renormalised " + what + " (norm " +
                               std::to_string(norm) + ")");
  }
  return norm;
}

std::string fmt(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_lines(const std::filesystem::path& path, const std::string& header, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << header << body;
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace

std::vector<Keypoint> read_points(const std::filesystem::path& path) {
  std::vector<Keypoint> out;
  for_each_row(path, 5, [&](const std::vector<double>& v, std::size_t line_no) {
    if (v[4] < 0.0) throw FormatError(where(path, line_no) + ": negative inverse-distance variance");
    out.push_back(Keypoint{Vec3(v[1], v[2], v[3]), v[4], v[0]});
  });
  return out;
}

std::vector<Pose> read_trajectory(const std::filesystem::path& path, IngestReport* report) {
  std::vector<Pose> out;
  for_each_row(path, 8, [&](const std::vector<double>& v, std::size_t line_no) {
    if (!out.empty() && !(v[0] > out.back().at)) {
      throw FormatError(where(path, line_no) + ": non-monotonic pose timestamp");
    }
    Quat q(v[1], v[2], v[3], v[4]);
    const double n = checked_norm(q.norm(), path, line_no, "quaternion", report);
    if (std::abs(n - 1.0) > 1e-9) q.coeffs() /= n;
    out.push_back(Pose{q, Vec3(v[5], v[6], v[7]), v[0]});
  });
  return out;
}

std::vector<GazeSample> read_gaze(const std::filesystem::path& path, IngestReport* report) {
  std::vector<GazeSample> out;
  for_each_row(path, 4, [&](const std::vector<double>& v, std::size_t line_no) {
    Vec3 g(v[1], v[2], v[3]);
    const double n = checked_norm(g.norm(), path, line_no, "gaze direction", report);
    if (std::abs(n - 1.0) > 1e-9) g /= n;
    out.push_back(GazeSample{g, v[0]});
  });
  return out;
}

void write_points(const std::filesystem::path& path, const std::vector<Keypoint>& points) {
  std::string body;
  body.reserve(points.size() * 64);
  for (const auto& p : points) {
    body += fmt(p.observed_at) + ',' + fmt(p.position.x()) + ',' + fmt(p.position.y()) + ',' +
            fmt(p.position.z()) + ',' + fmt(p.inv_dist_variance) + '\n';
  }
  write_lines(path, "# t_sec,x,y,z,inv_dist_var\n", body);
}

void write_trajectory(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  std::string body;
  for (const auto& p : poses) {
    const auto& q = p.rotation;
    body += fmt(p.at) + ',' + fmt(q.w()) + ',' + fmt(q.x()) + ',' + fmt(q.y()) + ',' + fmt(q.z()) +
            ',' + fmt(p.translation.x()) + ',' + fmt(p.translation.y()) + ',' +
            fmt(p.translation.z()) + '\n';
  }
  write_lines(path, "# t_sec,qw,qx,qy,qz,tx,ty,tz\n", body);
}

void write_gaze(const std::filesystem::path& path, const std::vector<GazeSample>& gazes) {
  std::string body;
  for (const auto& g : gazes) {
    body += fmt(g.at) + ',' + fmt(g.direction.x()) + ',' + fmt(g.direction.y()) + ',' +
            fmt(g.direction.z()) + '\n';
  }
  write_lines(path, "# t_sec,gx,gy,gz\n", body);
}

RawStreams read_streams(const std::filesystem::path& points_file,
                        const std::filesystem::path& trajectory_file,
                        const std::filesystem::path& gaze_file, IngestReport* report) {
  RawStreams s;
  s.points = read_points(points_file);
  s.poses = read_trajectory(trajectory_file, report);
  s.gazes = read_gaze(gaze_file, report);
  if (s.poses.empty()) throw FormatError("trajectory stream empty");
  if (s.gazes.empty()) throw FormatError("gaze stream empty");
  return s;
}

AlignedStreams ingest(const std::filesystem::path& points_file,
                      const std::filesystem::path& trajectory_file,
                      const std::filesystem::path& gaze_file, double frame_quantum,
                      IngestReport* report) {
  const RawStreams s = read_streams(points_file, trajectory_file, gaze_file, report);
  return align_streams(s.points, s.poses, s.gazes, frame_quantum);
}

namespace detail {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace detail
}  // namespace fovs
