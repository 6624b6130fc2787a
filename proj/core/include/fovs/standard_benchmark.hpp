#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fovs/dataset.hpp"

namespace fovs {

/// Synthetic benchmark: touring recordings in the standard scene, cut into
/// samples and truncated to `sample_count` in recording order.
struct BenchmarkSpec {
  std::uint64_t scene_seed = 42;
  std::size_t sample_count = 2000;
  double recording_s = 60.0;
  double density_scale = 1.0;
  SampleSpec spec;
};

/// Id of the r-th benchmark recording, e.g. "rec007".
std::string benchmark_recording_id(std::size_t r);

/// Recordings are generated in parallel; the result does not depend on the
/// worker count.
std::vector<SpanSample> standard_benchmark(const BenchmarkSpec& bench, int workers = 0);

}  // namespace fovs
