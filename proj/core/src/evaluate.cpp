#include "fovs/evaluate.hpp"

#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "fovs/parallel.hpp"

namespace fovs {

const LevelMetrics* MetricReport::level(SpanLevel l) const {
  for (const auto& m : levels) {
    if (m.level == l) return &m;
  }
  return nullptr;
}

Evaluation evaluate(const Predictor& predict, const std::vector<SpanSample>& samples,
                    const std::vector<std::size_t>& indices, const std::string& source, int workers) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty split");
  Evaluation out;
  out.per_sample.resize(indices.size());
  std::vector<std::vector<SpanLevel>> levels(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto& s = samples.at(indices[i]);
        const Forecast f = predict(s);
        auto& m = out.per_sample[i];
        for (std::size_t l = 0; l < f.levels.size(); ++l) {
          m.scores.push_back(grid_metrics(f.binarized[l], s.target[static_cast<std::size_t>(f.levels[l])]));
        }
        if (const auto* fov = f.grid(SpanLevel::foveal)) {
          m.foveal = foveal_distance_stats(*fov, s.target[static_cast<std::size_t>(SpanLevel::foveal)]);
        }
        levels[i] = f.levels;
      },
      workers);

  auto& r = out.report;
  r.source = source;
  r.sample_count = indices.size();
  for (auto l : levels.front()) r.levels.push_back(LevelMetrics{l});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (levels[i] != levels.front()) throw std::invalid_argument("evaluate: predictor changed its level set");
    const auto& m = out.per_sample[i];
    for (std::size_t l = 0; l < m.scores.size(); ++l) {
      r.levels[l].iou += m.scores[l].iou;
      r.levels[l].f1 += m.scores[l].f1;
      r.levels[l].precision += m.scores[l].precision;
      r.levels[l].recall += m.scores[l].recall;
      if (m.scores[l].both_empty) ++r.levels[l].both_empty;
    }
  }
  const auto n = static_cast<double>(indices.size());
  for (auto& l : r.levels) {
    l.iou /= n;
    l.f1 /= n;
    l.precision /= n;
    l.recall /= n;
  }
  DistanceStats sum;
  std::size_t kept = 0;
  for (const auto& m : out.per_sample) {
    if (!m.foveal) continue;
    sum.min += m.foveal->min;
    sum.avg += m.foveal->avg;
    sum.max += m.foveal->max;
    ++kept;
  }
  r.dropped_count = indices.size() - kept;
  if (kept > 0) {
    const auto k = static_cast<double>(kept);
    r.foveal_distance_cm = DistanceStats{sum.min / k, sum.avg / k, sum.max / k};
  }
  return out;
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "level,metric,value\n";
  for (const auto& l : report.levels) {
    const char* name = level_name(l.level);
    os << name << ",iou," << l.iou << '\n';
    os << name << ",f1," << l.f1 << '\n';
    os << name << ",precision," << l.precision << '\n';
    os << name << ",recall," << l.recall << '\n';
    os << name << ",both_empty," << l.both_empty << '\n';
  }
  if (report.foveal_distance_cm) {
    os << "foveal,distance_min_cm," << report.foveal_distance_cm->min << '\n';
    os << "foveal,distance_avg_cm," << report.foveal_distance_cm->avg << '\n';
    os << "foveal,distance_max_cm," << report.foveal_distance_cm->max << '\n';
  }
  os << "all,sample_count," << report.sample_count << '\n';
  os << "all,dropped_count," << report.dropped_count << '\n';
  return os.str();
}

std::string report_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["source"] = report.source;
  j["sample_count"] = report.sample_count;
  j["dropped_count"] = report.dropped_count;
  auto& levels = j["levels"];
  levels = nlohmann::ordered_json::object();
  for (const auto& l : report.levels) {
    levels[level_name(l.level)] = {{"iou", l.iou},
                                   {"f1", l.f1},
                                   {"precision", l.precision},
                                   {"recall", l.recall},
                                   {"both_empty", l.both_empty}};
  }
  if (report.foveal_distance_cm) {
    j["foveal_distance_cm"] = {{"min", report.foveal_distance_cm->min},
                               {"avg", report.foveal_distance_cm->avg},
                               {"max", report.foveal_distance_cm->max}};
  } else {
    j["foveal_distance_cm"] = nullptr;
  }
  return j.dump(2) + "\n";
}

}  // namespace fovs
