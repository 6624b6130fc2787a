#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fovs/forecaster.hpp"
#include "fovs/metrics.hpp"

namespace fovs {

struct LevelMetrics {
  SpanLevel level = SpanLevel::foveal;
  double iou = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Samples where prediction and truth were both empty (scored 1).
  std::size_t both_empty = 0;
};

struct MetricReport {
  std::string source;
  std::vector<LevelMetrics> levels;
  /// Mean over samples where both foveal grids are non-empty.
  std::optional<DistanceStats> foveal_distance_cm;
  std::size_t sample_count = 0;
  /// Samples excluded from the foveal distance statistics.
  std::size_t dropped_count = 0;

  const LevelMetrics* level(SpanLevel l) const;
};

struct SampleMetrics {
  std::vector<GridScores> scores;  // one per forecast level
  std::optional<DistanceStats> foveal;
};

struct Evaluation {
  MetricReport report;
  std::vector<SampleMetrics> per_sample;
};

using Predictor = std::function<Forecast(const SpanSample&)>;

/// Scores `predict` on the indexed samples. Samples run in parallel; the
/// aggregate is an arithmetic mean accumulated in index order.
Evaluation evaluate(const Predictor& predict, const std::vector<SpanSample>& samples,
                    const std::vector<std::size_t>& indices, const std::string& source = "", int workers = 0);

/// Rows "level,metric,value".
std::string report_csv(const MetricReport& report);
std::string report_json(const MetricReport& report);

}  // namespace fovs
