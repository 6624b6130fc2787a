#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fovs/geometry.hpp"

namespace fovs {

/// Raised when two grids with different geometry are combined.
class GeometryMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// R x R x R binary occupancy over a world-axis-aligned cube of side D whose
/// lower corner is `origin`. Cells are bit-packed in x-major order
/// (linear index = (i*R + j)*R + k).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int resolution, double cube_length_m, const Vec3& origin);

  int resolution() const { return resolution_; }
  double cube_length() const { return cube_length_; }
  const Vec3& origin() const { return origin_; }
  double cell_edge() const { return cube_length_ / resolution_; }
  std::size_t cell_count() const { return bits_.empty() ? 0 : cells_; }

  std::size_t linear_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution_ + j) * resolution_ + k;
  }
  std::array<int, 3> cell_of(std::size_t linear) const;
  Vec3 cell_center(int i, int j, int k) const;

  bool test(int i, int j, int k) const { return test(linear_index(i, j, k)); }
  bool test(std::size_t linear) const { return (bits_[linear >> 6] >> (linear & 63)) & 1u; }
  void set(int i, int j, int k) { set(linear_index(i, j, k)); }
  void set(std::size_t linear) { bits_[linear >> 6] |= std::uint64_t{1} << (linear & 63); }
  void clear();

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  /// Indices of set cells, ascending.
  std::vector<std::size_t> set_cells() const;

  std::span<const std::uint64_t> words() const { return bits_; }
  std::span<std::uint64_t> words() { return bits_; }
  std::size_t payload_bytes() const { return bits_.size() * sizeof(std::uint64_t); }

  /// Throws GeometryMismatch naming the first differing field.
  void require_same_geometry(const OccupancyGrid& other) const;
  bool same_geometry(const OccupancyGrid& other) const;

  OccupancyGrid& operator|=(const OccupancyGrid& other);
  /// Every set cell of this grid is also set in `other`.
  bool subset_of(const OccupancyGrid& other) const;

  bool operator==(const OccupancyGrid& other) const;

 private:
  int resolution_ = 0;
  double cube_length_ = 0.0;
  Vec3 origin_ = Vec3::Zero();
  std::size_t cells_ = 0;
  std::vector<std::uint64_t> bits_;
};

OccupancyGrid grid_union(const OccupancyGrid& a, const OccupancyGrid& b);
OccupancyGrid grid_intersection(const OccupancyGrid& a, const OccupancyGrid& b);
std::size_t grid_count(const OccupancyGrid& a);
/// Popcount of a AND b without materialising the intersection.
std::size_t grid_overlap(const OccupancyGrid& a, const OccupancyGrid& b);

/// Empty grid anchored at anchor.translation - D/2 (world-axis-aligned).
OccupancyGrid make_grid(const Vec3& anchor, const SpanConfig& cfg);

/// Linear cell index of floor((p - anchor + D/2) * R / D), or false when the
/// point falls outside [0, R)^3.
bool locate_cell(const OccupancyGrid& grid, const Vec3& p, const Vec3& anchor, std::size_t& linear);

/// Sets cell floor((p - anchor + D/2) * R / D) for every point that lands in
/// [0, R)^3. Half-open cells: a point on an interior face goes to the higher
/// index, points on the upper domain face are ignored.
void voxelize_into(OccupancyGrid& grid, std::span<const Keypoint> points, const Vec3& anchor);
OccupancyGrid voxelize(std::span<const Keypoint> points, const Pose& anchor_pose,
                       const SpanConfig& cfg);

/// Four span levels (foveal, central, peripheral, orientation) plus the
/// scene channel, co-registered on one anchor.
struct MultiLevelSpan {
  std::array<OccupancyGrid, kNumLevels> levels;
  OccupancyGrid scene;
  double t_begin = 0.0;
  double t_end = 0.0;

  const OccupancyGrid& level(SpanLevel l) const { return levels[static_cast<std::size_t>(l)]; }
  OccupancyGrid& level(SpanLevel l) { return levels[static_cast<std::size_t>(l)]; }
};

struct LiftDiagnostics {
  std::size_t frames = 0;
  std::size_t selected_points = 0;
  std::size_t zero_length = 0;
};

/// Selected keypoints of one frame with a per-point level bitmask
/// (bit l set iff the point lies in level l's cone).
struct LiftedFrame {
  std::int64_t frame = 0;
  double t = 0.0;
  std::vector<Vec3> positions;
  std::vector<std::uint8_t> level_mask;
  std::size_t zero_length = 0;
};

LiftedFrame lift_frame(const FrameBundle& frame, const SpanConfig& cfg);
/// ORs a lifted frame into every channel of `span`.
void accumulate_lifted(MultiLevelSpan& span, const LiftedFrame& lifted, const Vec3& anchor);

/// Accumulates one frame into `span`: select_observed, classify per level,
/// voxelize against the span's anchor.
void accumulate_frame(MultiLevelSpan& span, const FrameBundle& frame, const Vec3& anchor,
                      const SpanConfig& cfg, LiftDiagnostics* diagnostics = nullptr);

/// Multi-level span over the given frames, anchored at `anchor_pose`.
/// Throws std::invalid_argument on an empty frame list.
MultiLevelSpan build_multilevel(std::span<const FrameBundle> frames, const Pose& anchor_pose,
                                const SpanConfig& cfg, LiftDiagnostics* diagnostics = nullptr);
/// Anchored at the first frame's pose (window start).
MultiLevelSpan build_multilevel(std::span<const FrameBundle> frames, const SpanConfig& cfg,
                                LiftDiagnostics* diagnostics = nullptr);

}  // namespace fovs
