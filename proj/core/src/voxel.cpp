#include "fovs/voxel.hpp"

#include <bit>
#include <cmath>
#include <sstream>

namespace fovs {

OccupancyGrid::OccupancyGrid(int resolution, double cube_length_m, const Vec3& origin)
    : resolution_(resolution), cube_length_(cube_length_m), origin_(origin) {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be >= 1");
  if (!(cube_length_m > 0.0)) throw std::invalid_argument("grid cube length must be > 0");
  cells_ = static_cast<std::size_t>(resolution) * resolution * resolution;
  bits_.assign((cells_ + 63) / 64, 0);
}

std::array<int, 3> OccupancyGrid::cell_of(std::size_t linear) const {
  const auto r = static_cast<std::size_t>(resolution_);
  return {static_cast<int>(linear / (r * r)), static_cast<int>((linear / r) % r),
          static_cast<int>(linear % r)};
}

Vec3 OccupancyGrid::cell_center(int i, int j, int k) const {
  return origin_ + cell_edge() * Vec3(i + 0.5, j + 0.5, k + 0.5);
}

void OccupancyGrid::clear() { std::fill(bits_.begin(), bits_.end(), 0); }

std::size_t OccupancyGrid::count() const {
  std::size_t n = 0;
  for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> OccupancyGrid::set_cells() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    std::uint64_t word = bits_[w];
    while (word != 0) {
      const int b = std::countr_zero(word);
      out.push_back(w * 64 + static_cast<std::size_t>(b));
      word &= word - 1;
    }
  }
  return out;
}

bool OccupancyGrid::same_geometry(const OccupancyGrid& other) const {
  return resolution_ == other.resolution_ && cube_length_ == other.cube_length_ &&
         origin_ == other.origin_;
}

void OccupancyGrid::require_same_geometry(const OccupancyGrid& other) const {
  if (resolution_ != other.resolution_) {
    std::ostringstream os;
    os << "grid geometry mismatch: resolution " << resolution_ << " vs " << other.resolution_;
    throw GeometryMismatch(os.str());
  }
  if (cube_length_ != other.cube_length_) {
    std::ostringstream os;
    os << "grid geometry mismatch: cube_length " << cube_length_ << " vs " << other.cube_length_;
    throw GeometryMismatch(os.str());
  }
  if (origin_ != other.origin_) throw GeometryMismatch("grid geometry mismatch: origin");
}

OccupancyGrid& OccupancyGrid::operator|=(const OccupancyGrid& other) {
  require_same_geometry(other);
  for (std::size_t w = 0; w < bits_.size(); ++w) bits_[w] |= other.bits_[w];
  return *this;
}

bool OccupancyGrid::subset_of(const OccupancyGrid& other) const {
  require_same_geometry(other);
  for (std::size_t w = 0; w < bits_.size(); ++w) {
    if ((bits_[w] & ~other.bits_[w]) != 0) return false;
  }
  return true;
}

bool OccupancyGrid::operator==(const OccupancyGrid& other) const {
  return same_geometry(other) && bits_ == other.bits_;
}

OccupancyGrid grid_union(const OccupancyGrid& a, const OccupancyGrid& b) {
  OccupancyGrid out = a;
  out |= b;
  return out;
}

OccupancyGrid grid_intersection(const OccupancyGrid& a, const OccupancyGrid& b) {
  a.require_same_geometry(b);
  OccupancyGrid out = a;
  auto w = out.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] &= wb[i];
  return out;
}

std::size_t grid_count(const OccupancyGrid& a) { return a.count(); }

std::size_t grid_overlap(const OccupancyGrid& a, const OccupancyGrid& b) {
  a.require_same_geometry(b);
  const auto wa = a.words();
  const auto wb = b.words();
  std::size_t n = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) n += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
  return n;
}

OccupancyGrid make_grid(const Vec3& anchor, const SpanConfig& cfg) {
  const double half = 0.5 * cfg.cube_length_m;
  return OccupancyGrid(cfg.resolution, cfg.cube_length_m, anchor - Vec3::Constant(half));
}

bool locate_cell(const OccupancyGrid& grid, const Vec3& p, const Vec3& anchor, std::size_t& linear) {
  const int r = grid.resolution();
  const double d = grid.cube_length();
  const double half = 0.5 * d;
  const double scale = r / d;
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const double u = ((p[a] - anchor[a]) + half) * scale;
    if (!(u >= 0.0 && u < r)) return false;
    idx[a] = static_cast<int>(std::floor(u));
  }
  linear = grid.linear_index(idx[0], idx[1], idx[2]);
  return true;
}

void voxelize_into(OccupancyGrid& grid, std::span<const Keypoint> points, const Vec3& anchor) {
  std::size_t cell = 0;
  for (const auto& p : points) {
    if (locate_cell(grid, p.position, anchor, cell)) grid.set(cell);
  }
}

OccupancyGrid voxelize(std::span<const Keypoint> points, const Pose& anchor_pose,
                       const SpanConfig& cfg) {
  OccupancyGrid grid = make_grid(anchor_pose.translation, cfg);
  voxelize_into(grid, points, anchor_pose.translation);
  return grid;
}

LiftedFrame lift_frame(const FrameBundle& frame, const SpanConfig& cfg) {
  const auto observed = select_observed(frame.points, frame.pose, frame.t, cfg);
  const auto membership = classify_levels(observed, frame.pose, frame.gaze.direction, cfg);
  LiftedFrame out;
  out.frame = frame.frame;
  out.t = frame.t;
  out.zero_length = membership.zero_length;
  out.positions.resize(observed.size());
  out.level_mask.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    out.positions[i] = observed[i].position;
    std::uint8_t mask = 0;
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      if (membership.inside[i][l]) mask |= static_cast<std::uint8_t>(1u << l);
    }
    out.level_mask[i] = mask;
  }
  return out;
}

void accumulate_lifted(MultiLevelSpan& span, const LiftedFrame& lifted, const Vec3& anchor) {
  std::size_t cell = 0;
  for (std::size_t i = 0; i < lifted.positions.size(); ++i) {
    if (!locate_cell(span.scene, lifted.positions[i], anchor, cell)) continue;
    span.scene.set(cell);
    const std::uint8_t mask = lifted.level_mask[i];
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      if (mask & (1u << l)) span.levels[l].set(cell);
    }
  }
}

void accumulate_frame(MultiLevelSpan& span, const FrameBundle& frame, const Vec3& anchor,
                      const SpanConfig& cfg, LiftDiagnostics* diagnostics) {
  const LiftedFrame lifted = lift_frame(frame, cfg);
  accumulate_lifted(span, lifted, anchor);
  if (diagnostics != nullptr) {
    ++diagnostics->frames;
    diagnostics->selected_points += lifted.positions.size();
    diagnostics->zero_length += lifted.zero_length;
  }
}

MultiLevelSpan build_multilevel(std::span<const FrameBundle> frames, const Pose& anchor_pose,
                                const SpanConfig& cfg, LiftDiagnostics* diagnostics) {
  if (frames.empty()) throw std::invalid_argument("build_multilevel: window has no frames");
  const Vec3& anchor = anchor_pose.translation;
  MultiLevelSpan span;
  for (auto& g : span.levels) g = make_grid(anchor, cfg);
  span.scene = make_grid(anchor, cfg);
  span.t_begin = frames.front().t;
  span.t_end = frames.back().t;
  for (const auto& f : frames) accumulate_frame(span, f, anchor, cfg, diagnostics);
  return span;
}

MultiLevelSpan build_multilevel(std::span<const FrameBundle> frames, const SpanConfig& cfg,
                                LiftDiagnostics* diagnostics) {
  if (frames.empty()) throw std::invalid_argument("build_multilevel: window has no frames");
  return build_multilevel(frames, frames.front().pose, cfg, diagnostics);
}

}  // namespace fovs
