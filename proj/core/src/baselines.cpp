#include "fovs/baselines.hpp"

namespace fovs {

GlobalPrior::GlobalPrior(const std::vector<SpanSample>& samples, const std::vector<std::size_t>& train_indices) {
  if (train_indices.empty()) throw std::invalid_argument("global prior: empty training split");
  resolution_ = samples.at(train_indices.front()).target[0].resolution();
  const std::size_t n = static_cast<std::size_t>(resolution_) * resolution_ * resolution_;
  std::vector<std::uint64_t> counts(kNumLevels * n, 0);
  for (auto i : train_indices) {
    const auto& s = samples.at(i);
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      if (s.target[l].resolution() != resolution_) throw GeometryMismatch("global prior: mixed resolutions");
      for (auto c : s.target[l].set_cells()) ++counts[l * n + c];
    }
  }
  mean_.resize(counts.size());
  const auto total = static_cast<double>(train_indices.size());
  for (std::size_t k = 0; k < counts.size(); ++k) mean_[k] = static_cast<double>(counts[k]) / total;
}

Forecast GlobalPrior::forecast(const SpanSample& sample, double threshold) const {
  if (sample.target[0].resolution() != resolution_) throw GeometryMismatch("global prior: resolution mismatch");
  return make_forecast({kAllLevels.begin(), kAllLevels.end()}, mean_, sample.target[0], threshold);
}

Forecast baseline_persistence(const SpanSample& sample) {
  if (sample.inputs.empty()) throw std::invalid_argument("persistence: sample has no input frames");
  const auto& like = sample.target[0];
  const std::size_t n = like.cell_count();
  std::vector<double> soft(kNumLevels * n, 0.0);
  for (std::size_t l = 0; l < kNumLevels; ++l) {
    OccupancyGrid u = sample.inputs.front()[l];
    for (std::size_t f = 1; f < sample.inputs.size(); ++f) u |= sample.inputs[f][l];
    u.require_same_geometry(like);
    for (auto c : u.set_cells()) soft[l * n + c] = 1.0;
  }
  return make_forecast({kAllLevels.begin(), kAllLevels.end()}, std::move(soft), like);
}

}  // namespace fovs
