#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fovs/geometry.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace fovs {
namespace {

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

// K smallest of two ascending lists, ascending: min(a[i], b[K-1-i]) is
// bitonic, then a half-cleaner network sorts it.
template <std::size_t K>
std::array<double, K> merge_smallest(const std::array<double, K>& a, const std::array<double, K>& b) {
  std::array<double, K> c;
  for (std::size_t j = 0; j < K; ++j) c[j] = std::min(a[j], b[K - 1 - j]);
  if constexpr ((K & (K - 1)) != 0) {
    // Half-cleaners only sort power-of-two lengths.
    std::sort(c.begin(), c.end());
    return c;
  }
  for (std::size_t half = K / 2; half > 0; half /= 2) {
    for (std::size_t blk = 0; blk < K; blk += 2 * half) {
      for (std::size_t j = blk; j < blk + half; ++j) {
        const double x = c[j], y = c[j + half];
        c[j] = std::min(x, y);
        c[j + half] = std::max(x, y);
      }
    }
  }
  return c;
}

template <std::size_t K>
void smallest_fixed(const std::vector<double>& values, std::vector<double>& out) {
  std::array<double, K> best;
  best.fill(std::numeric_limits<double>::infinity());
#if defined(__AVX2__)
  static_assert(K % 4 == 0);
  constexpr std::size_t kLanes = K / 4;
  constexpr std::size_t kChains = 2;
  // Sorted insert of v dropping the largest: new[i] = min(b[i], max(b[i-1], v)).
  // Each insert is a serial chain through the registers, so values are dealt
  // round-robin to independent lists that are merged at the end.
  __m256d r[kChains][kLanes];
  for (auto& chain : r) {
    for (auto& lane : chain) lane = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  }
  const auto insert = [](__m256d* lanes, double v) {
    const __m256d vv = _mm256_set1_pd(v);
    __m256d carry = vv;
    for (std::size_t j = 0; j < kLanes; ++j) {
      const __m256d rot = _mm256_permute4x64_pd(lanes[j], _MM_SHUFFLE(2, 1, 0, 3));
      const __m256d shifted = _mm256_blend_pd(rot, carry, 0x1);
      carry = rot;
      lanes[j] = _mm256_min_pd(lanes[j], _mm256_max_pd(shifted, vv));
    }
  };
  const std::size_t n = values.size();
  std::size_t i = 0;
  for (; i + kChains <= n; i += kChains) {
    for (std::size_t c = 0; c < kChains; ++c) insert(r[c], values[i + c]);
  }
  for (std::size_t c = 0; i < n; ++i, ++c) insert(r[c], values[i]);
  std::array<std::array<double, K>, kChains> lists;
  for (std::size_t c = 0; c < kChains; ++c) {
    for (std::size_t j = 0; j < kLanes; ++j) _mm256_storeu_pd(lists[c].data() + 4 * j, r[c][j]);
  }
  best = lists[0];
  for (std::size_t c = 1; c < kChains; ++c) best = merge_smallest<K>(best, lists[c]);
#else
  for (double v : values) {
    if (!(v < best[K - 1])) continue;
    std::array<double, K> next;
    next[0] = std::min(best[0], v);
    for (std::size_t i = 1; i < K; ++i) next[i] = std::min(best[i], std::max(best[i - 1], v));
    best = next;
  }
#endif
  out.assign(best.begin(), best.end());
}

// The k smallest values of `values`, ascending. Common k use a branchless
// sorted insert; mispredicted branches dominate the generic selection.
void smallest(std::vector<double>& values, std::size_t k, std::vector<double>& out) {
  switch (k) {
    case 8: return smallest_fixed<8>(values, out);
    case 12: return smallest_fixed<12>(values, out);
    case 16: return smallest_fixed<16>(values, out);
    case 32: return smallest_fixed<32>(values, out);
    default: break;
  }
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k) - 1, values.end());
  out.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
}

// Dense uniform bucket grid in CSR layout over the bounding box of the points.
// Positions are copied in bucket order so ring scans read contiguous memory.
class BucketGrid {
 public:
  BucketGrid(std::span<const Vec3> points, int k) {
    lo_ = points[0];
    Vec3 hi = points[0];
    for (const auto& p : points) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    Vec3 extent = hi - lo_;
    const double max_extent = std::max(extent.maxCoeff(), 1e-9);
    extent = extent.cwiseMax(max_extent * 1e-3);
    const double n = static_cast<double>(points.size());
    // Keypoints mostly lie on surfaces, so buckets are sized finer than the
    // volumetric k-neighbourhood and the grid is allowed to be mostly empty.
    cell_ = std::cbrt(extent.prod() * (k + 1) / n) / 2.5;
    const double max_cells = 8.0 * n + 64.0;
    for (;;) {
      for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(extent[a] / cell_)) + 1;
      if (static_cast<double>(dims_[0]) * dims_[1] * dims_[2] <= max_cells) break;
      cell_ *= 1.25;
    }

    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    start_.assign(cells + 1, 0);
    std::vector<std::size_t> cell_of(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cell_of[i] = linear(coords(points[i]));
      ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    order_.resize(points.size());
    sorted_.resize(points.size());
    xs_.resize(points.size());
    ys_.resize(points.size());
    zs_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t slot = fill[cell_of[i]]++;
      order_[slot] = i;
      sorted_[slot] = points[i];
      xs_[slot] = points[i].x();
      ys_[slot] = points[i].y();
      zs_[slot] = points[i].z();
    }
  }

  // Mean distance to the k nearest other points for every point, indexed by
  // original position. Queries sharing a bucket share one candidate list
  // gathered from the surrounding block; a query whose k-th candidate could
  // be beaten by a point outside the block retries with a wider block and
  // finally a linear scan.
  std::vector<double> mean_distances(int k) const {
    constexpr int kBlock = 1;
    constexpr int kWidest = 6;
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> means(sorted_.size(), 0.0);
    Candidates near, wide;
    std::vector<double> best;
    best.reserve(ku);
    for (int x = 0; x < dims_[0]; ++x) {
      for (int y = 0; y < dims_[1]; ++y) {
        for (int z = 0; z < dims_[2]; ++z) {
          const std::array<int, 3> c{x, y, z};
          const std::size_t cell = linear(c);
          if (start_[cell] == start_[cell + 1]) continue;
          gather(c, kBlock, near);
          for (std::size_t s = start_[cell]; s < start_[cell + 1]; ++s) {
            bool exact = select(near, s, ku, best);
            for (int r = kBlock + 1; !exact && r <= kWidest; ++r) {
              gather(c, r, wide);
              exact = select(wide, s, ku, best);
            }
            if (!exact) nearest(s, k, best);
            double sum = 0.0;
            for (double v : best) sum += std::sqrt(v);
            means[order_[s]] = sum / k;
          }
        }
      }
    }
    return means;
  }

  // Squared distances from the point in slot `slot` to its k nearest other
  // points, ascending, by a linear scan.
  void nearest(std::size_t slot, int k, std::vector<double>& best) const {
    best.clear();
    const auto ku = static_cast<std::size_t>(k);
    const Vec3& q = sorted_[slot];
    for (std::size_t s = 0; s < sorted_.size(); ++s) {
      if (s == slot) continue;
      const double v = squared_distance(sorted_[s], q);
      if (best.size() == ku) {
        if (!(v < best.back())) continue;
        best.pop_back();
      }
      best.insert(std::upper_bound(best.begin(), best.end(), v), v);
    }
  }

 private:
  struct Candidates {
    std::vector<double> x, y, z, d2;
    std::vector<std::size_t> slot;
    std::array<int, 3> lo{}, hi{};
  };

  // Points in the block of Chebyshev radius r around bucket c, as columns.
  void gather(const std::array<int, 3>& c, int r, Candidates& out) const {
    out.x.clear();
    out.y.clear();
    out.z.clear();
    out.slot.clear();
    for (int a = 0; a < 3; ++a) {
      out.lo[a] = std::max(0, c[a] - r);
      out.hi[a] = std::min(dims_[a] - 1, c[a] + r);
    }
    for (int bx = out.lo[0]; bx <= out.hi[0]; ++bx) {
      for (int by = out.lo[1]; by <= out.hi[1]; ++by) {
        const std::size_t row = linear({bx, by, 0});
        const std::size_t first = start_[row + out.lo[2]];
        const std::size_t last = start_[row + out.hi[2] + 1];
        out.x.insert(out.x.end(), xs_.begin() + first, xs_.begin() + last);
        out.y.insert(out.y.end(), ys_.begin() + first, ys_.begin() + last);
        out.z.insert(out.z.end(), zs_.begin() + first, zs_.begin() + last);
        for (std::size_t t = first; t < last; ++t) out.slot.push_back(t);
      }
    }
    out.d2.resize(out.x.size());
  }

  void distances(Candidates& cand, std::size_t s) const {
    const Vec3& q = sorted_[s];
    const double qx = q.x(), qy = q.y(), qz = q.z();
    for (std::size_t j = 0; j < cand.x.size(); ++j) {
      const double dx = cand.x[j] - qx;
      const double dy = cand.y[j] - qy;
      const double dz = cand.z[j] - qz;
      cand.d2[j] = dx * dx + dy * dy + dz * dz;
    }
    for (std::size_t j = 0; j < cand.x.size(); ++j) {
      if (cand.slot[j] == s) cand.d2[j] = std::numeric_limits<double>::infinity();
    }
  }

  // k smallest squared distances from slot s among the candidates. False when
  // a point outside the block could still be closer than the k-th.
  bool select(Candidates& cand, std::size_t s, std::size_t k, std::vector<double>& best) const {
    if (cand.x.size() <= k) return false;
    distances(cand, s);
    smallest(cand.d2, k, best);
    const Vec3& q = sorted_[s];
    double reach = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (cand.lo[a] > 0) reach = std::min(reach, q[a] - (lo_[a] + cand.lo[a] * cell_));
      if (cand.hi[a] + 1 < dims_[a]) reach = std::min(reach, lo_[a] + (cand.hi[a] + 1) * cell_ - q[a]);
    }
    return best.back() <= reach * reach;
  }

  std::array<int, 3> coords(const Vec3& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    }
    return c;
  }
  std::size_t linear(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[0]) * dims_[1] + c[1]) * dims_[2] + c[2];
  }

  Vec3 lo_;
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<std::size_t> start_;
  std::vector<std::size_t> order_;
  std::vector<Vec3> sorted_;
  std::vector<double> xs_, ys_, zs_;
};

}  // namespace

std::vector<double> knn_mean_distances(std::span<const Vec3> points, int k) {
  if (k < 1) throw std::invalid_argument("knn_mean_distances: k must be >= 1");
  if (points.size() <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("knn_mean_distances: need more than k points");
  }
  return BucketGrid(points, k).mean_distances(k);
}

std::vector<Keypoint> filter_outliers(std::span<const Keypoint> points, const SpanConfig& cfg) {
  const int k = cfg.outlier_neighbors;
  if (points.size() <= static_cast<std::size_t>(k)) return {points.begin(), points.end()};

  std::vector<Vec3> positions(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) positions[i] = points[i].position;
  const auto means = knn_mean_distances(positions, k);

  const double n = static_cast<double>(means.size());
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= n;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  const double stddev = std::sqrt(var / n);
  // Relative slack absorbs rounding noise on homogeneous sets where std is 0.
  const double threshold = mean + cfg.outlier_std_ratio * stddev + 1e-9 * mean;

  std::vector<Keypoint> kept;
  kept.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (means[i] <= threshold) kept.push_back(points[i]);
  }
  return kept;
}

}  // namespace fovs
