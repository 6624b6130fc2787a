#pragma once

#include <array>
#include <vector>

#include "fovs/forecaster.hpp"

namespace fovs {

/// Per-level mean occupancy of the training targets. Constant over samples.
class GlobalPrior {
 public:
  GlobalPrior(const std::vector<SpanSample>& samples, const std::vector<std::size_t>& train_indices);

  /// The prior placed on the sample's grid geometry.
  Forecast forecast(const SpanSample& sample, double threshold = 0.5) const;
  const std::vector<double>& mean() const { return mean_; }  // 4 x R^3
  int resolution() const { return resolution_; }

 private:
  int resolution_ = 0;
  std::vector<double> mean_;
};

/// Per level, the union of the sample's input frames (soft values 0 or 1).
Forecast baseline_persistence(const SpanSample& sample);

}  // namespace fovs
