#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "fovs/dataset.hpp"
#include "fovs/random.hpp"

namespace fovs {
namespace {

std::int64_t to_quanta(double seconds, double quantum, const char* what) {
  const double ratio = seconds / quantum;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-6) {
    throw std::invalid_argument(std::string(what) + " must be a multiple of the frame quantum");
  }
  return static_cast<std::int64_t>(rounded);
}

// Lifted frames of a recording, computed on demand and evicted once no later
// window can need them.
class LiftCache {
 public:
  LiftCache(const AlignedStreams& streams, const SpanConfig& cfg) : streams_(streams), cfg_(cfg) {}

  // Frames whose index lies in [lo, hi).
  std::vector<const LiftedFrame*> range(std::int64_t lo, std::int64_t hi) {
    std::vector<const LiftedFrame*> out;
    const auto& frames = streams_.frames;
    auto it = std::lower_bound(frames.begin(), frames.end(), lo,
                               [](const FrameBundle& f, std::int64_t v) { return f.frame < v; });
    for (; it != frames.end() && it->frame < hi; ++it) {
      auto found = cache_.find(it->frame);
      if (found == cache_.end()) found = cache_.emplace(it->frame, lift_frame(*it, cfg_)).first;
      out.push_back(&found->second);
    }
    return out;
  }

  void evict_before(std::int64_t frame) {
    cache_.erase(cache_.begin(), cache_.lower_bound(frame));
  }

 private:
  const AlignedStreams& streams_;
  const SpanConfig& cfg_;
  std::map<std::int64_t, LiftedFrame> cache_;
};

MultiLevelSpan empty_span(const Vec3& anchor, const SpanConfig& cfg) {
  MultiLevelSpan span;
  for (auto& g : span.levels) g = make_grid(anchor, cfg);
  span.scene = make_grid(anchor, cfg);
  return span;
}

const FrameBundle* first_frame_in(const AlignedStreams& streams, std::int64_t lo, std::int64_t hi) {
  const auto& frames = streams.frames;
  auto it = std::lower_bound(frames.begin(), frames.end(), lo,
                             [](const FrameBundle& f, std::int64_t v) { return f.frame < v; });
  if (it == frames.end() || it->frame >= hi) return nullptr;
  return &*it;
}

const FrameBundle* last_frame_in(const AlignedStreams& streams, std::int64_t lo, std::int64_t hi) {
  const auto& frames = streams.frames;
  auto it = std::lower_bound(frames.begin(), frames.end(), hi,
                             [](const FrameBundle& f, std::int64_t v) { return f.frame < v; });
  if (it == frames.begin()) return nullptr;
  --it;
  if (it->frame < lo) return nullptr;
  return &*it;
}

std::vector<std::array<OccupancyGrid, kInputChannels>> inputs_from(LiftCache& cache, const SampleSpec& spec,
                                                                   std::int64_t start, const Vec3& anchor) {
  const std::int64_t fq = spec.frame_quanta();
  std::vector<std::array<OccupancyGrid, kInputChannels>> inputs;
  for (int f = 0; f < spec.past_frames(); ++f) {
    MultiLevelSpan span = empty_span(anchor, spec.cfg);
    for (const auto* lifted : cache.range(start + f * fq, start + (f + 1) * fq)) {
      accumulate_lifted(span, *lifted, anchor);
    }
    std::array<OccupancyGrid, kInputChannels> channels;
    for (std::size_t l = 0; l < kNumLevels; ++l) channels[l] = std::move(span.levels[l]);
    channels[kSceneChannel] = std::move(span.scene);
    inputs.push_back(std::move(channels));
  }
  return inputs;
}

}  // namespace

void SampleSpec::validate() const {
  cfg.validate();
  if (!(t_past_s > 0.0)) throw std::invalid_argument("t_past must be > 0");
  if (!(t_future_s > 0.0)) throw std::invalid_argument("t_future must be > 0");
  if (!(stride_s > 0.0)) throw std::invalid_argument("stride must be > 0");
  if (!(frame_duration_s > 0.0)) throw std::invalid_argument("frame duration must be > 0");
  auto multiple = [&](double v, const char* what) {
    const double r = v / frame_duration_s;
    if (std::abs(r - std::round(r)) > 1e-6) {
      throw std::invalid_argument(std::string(what) + " must be a multiple of the frame duration");
    }
  };
  multiple(t_past_s, "t_past");
  multiple(t_future_s, "t_future");
  to_quanta(t_past_s, cfg.frame_quantum_s, "t_past");
  to_quanta(t_future_s, cfg.frame_quantum_s, "t_future");
  to_quanta(stride_s, cfg.frame_quantum_s, "stride");
  to_quanta(frame_duration_s, cfg.frame_quantum_s, "frame duration");
}

int SampleSpec::past_frames() const { return static_cast<int>(std::llround(t_past_s / frame_duration_s)); }
std::int64_t SampleSpec::past_quanta() const { return to_quanta(t_past_s, cfg.frame_quantum_s, "t_past"); }
std::int64_t SampleSpec::future_quanta() const { return to_quanta(t_future_s, cfg.frame_quantum_s, "t_future"); }
std::int64_t SampleSpec::stride_quanta() const { return to_quanta(stride_s, cfg.frame_quantum_s, "stride"); }
std::int64_t SampleSpec::frame_quanta() const {
  return to_quanta(frame_duration_s, cfg.frame_quantum_s, "frame duration");
}

SampleSpec skilled_activity_spec() {
  SampleSpec s;
  s.t_future_s = 4.0;
  return s;
}

bool SpanSample::operator==(const SpanSample& o) const {
  return inputs == o.inputs && target == o.target && anchor == o.anchor && current_gaze == o.current_gaze &&
         recording_id == o.recording_id && sample_time == o.sample_time;
}

std::size_t expected_window_count(double duration_s, const SampleSpec& spec) {
  const double slack = duration_s - spec.t_past_s - spec.t_future_s;
  if (slack < -1e-9) return 0;
  return 1 + static_cast<std::size_t>(std::floor(slack / spec.stride_s + 1e-9));
}

double recording_duration(const AlignedStreams& streams) {
  if (streams.frames.empty()) return 0.0;
  const auto span = streams.frames.back().frame - streams.frames.front().frame + 1;
  return static_cast<double>(span) * streams.frame_quantum_s;
}

std::vector<std::array<OccupancyGrid, kInputChannels>> build_inputs(const AlignedStreams& streams,
                                                                    const SampleSpec& spec,
                                                                    std::int64_t prediction_frame) {
  spec.validate();
  const std::int64_t start = prediction_frame - spec.past_quanta();
  const FrameBundle* anchor_frame = first_frame_in(streams, start, prediction_frame);
  if (anchor_frame == nullptr) throw std::invalid_argument("build_inputs: input window has no frames");
  LiftCache cache(streams, spec.cfg);
  return inputs_from(cache, spec, start, anchor_frame->pose.translation);
}

std::vector<SpanSample> build_samples(const AlignedStreams& streams, const SampleSpec& spec,
                                      const std::string& recording_id, BuildReport* report) {
  spec.validate();
  if (std::abs(streams.frame_quantum_s - spec.cfg.frame_quantum_s) > 1e-12) {
    throw std::invalid_argument("build_samples: stream frame quantum differs from the sample spec");
  }
  std::vector<SpanSample> samples;
  BuildReport local;
  if (streams.frames.empty()) {
    if (report != nullptr) *report = local;
    return samples;
  }

  const std::int64_t first = streams.frames.front().frame;
  const std::int64_t last = streams.frames.back().frame;
  const std::int64_t past = spec.past_quanta();
  const std::int64_t future = spec.future_quanta();
  const std::int64_t stride = spec.stride_quanta();

  LiftCache cache(streams, spec.cfg);
  for (std::int64_t pred = first + past; pred + future - 1 <= last; pred += stride) {
    ++local.windows;
    const std::int64_t start = pred - past;
    cache.evict_before(start);
    const FrameBundle* anchor_frame = first_frame_in(streams, start, pred);
    const FrameBundle* current = last_frame_in(streams, start, pred);
    if (anchor_frame == nullptr || current == nullptr) {
      ++local.dropped_empty_future;
      continue;
    }
    const Vec3 anchor = anchor_frame->pose.translation;

    MultiLevelSpan future_span = empty_span(anchor, spec.cfg);
    for (const auto* lifted : cache.range(pred, pred + future)) accumulate_lifted(future_span, *lifted, anchor);
    if (future_span.scene.empty()) {
      ++local.dropped_empty_future;
      continue;
    }

    SpanSample s;
    s.inputs = inputs_from(cache, spec, start, anchor);
    s.target = std::move(future_span.levels);
    s.anchor = current->pose;
    s.current_gaze = current->gaze;
    s.recording_id = recording_id;
    s.sample_time = static_cast<double>(pred) * spec.cfg.frame_quantum_s;
    samples.push_back(std::move(s));
  }
  if (report != nullptr) *report = local;
  return samples;
}

Split split(const std::vector<SpanSample>& samples, const SplitPolicy& policy) {
  if (policy.val_fraction < 0.0 || policy.test_fraction < 0.0 ||
      policy.val_fraction + policy.test_fraction > 1.0) {
    throw std::invalid_argument("split fractions must be non-negative and sum to at most 1");
  }
  Split out;
  std::vector<std::size_t> pool;
  if (policy.kind == SplitKind::by_recording_tag) {
    bool holdout_seen = false;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto it = policy.tags.find(samples[i].recording_id);
      if (it == policy.tags.end()) {
        throw std::invalid_argument("split: recording '" + samples[i].recording_id + "' has no tag");
      }
      if (it->second == policy.holdout_tag) {
        out.test.push_back(i);
        holdout_seen = true;
      } else {
        pool.push_back(i);
      }
    }
    if (!holdout_seen) throw std::invalid_argument("split: hold-out tag '" + policy.holdout_tag + "' absent");
  } else {
    pool.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) pool[i] = i;
  }

  // Stratify by recording: group, shuffle within groups, then assign by
  // systematic sampling along the concatenated order.
  std::map<std::string, std::vector<std::size_t>> strata;
  for (auto i : pool) strata[samples[i].recording_id].push_back(i);
  Rng rng(mix_seed(policy.seed, 0x5911));
  std::vector<std::size_t> ordered;
  for (auto& [id, members] : strata) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    ordered.insert(ordered.end(), members.begin(), members.end());
  }

  auto take_every = [](const std::vector<std::size_t>& in, double fraction, std::vector<std::size_t>& picked,
                       std::vector<std::size_t>& rest) {
    for (std::size_t p = 0; p < in.size(); ++p) {
      const auto before = static_cast<std::int64_t>(std::floor(static_cast<double>(p) * fraction + 1e-9));
      const auto after = static_cast<std::int64_t>(std::floor(static_cast<double>(p + 1) * fraction + 1e-9));
      (after > before ? picked : rest).push_back(in[p]);
    }
  };

  std::vector<std::size_t> remaining;
  if (policy.kind == SplitKind::random_stratified && policy.test_fraction > 0.0) {
    take_every(ordered, policy.test_fraction, out.test, remaining);
  } else {
    remaining = ordered;
  }
  const double test_share = policy.kind == SplitKind::random_stratified ? policy.test_fraction : 0.0;
  const double val_share = test_share < 1.0 ? policy.val_fraction / (1.0 - test_share) : 0.0;
  take_every(remaining, std::min(val_share, 1.0), out.val, out.train);

  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace fovs
