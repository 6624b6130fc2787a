#include "fovs/forecaster.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "fovs/random.hpp"

namespace fovs {
namespace {

using Vec = std::vector<double>;

std::size_t cube(int n) { return static_cast<std::size_t>(n) * n * n; }

// Refinement convolutions run on every decoder stage except the finest.
bool has_refine(int stage) { return stage > 0; }

void fill_normal(std::span<double> v, Rng& rng, double stddev) {
  for (auto& x : v) x = rng.normal(0.0, stddev);
}

}  // namespace

const char* loss_name(LossKind kind) { return kind == LossKind::dice ? "dice" : "bce"; }

LossKind parse_loss(const std::string& name) {
  if (name == "dice") return LossKind::dice;
  if (name == "bce") return LossKind::bce;
  throw std::invalid_argument("unknown loss '" + name + "' (expected dice or bce)");
}

void ModelConfig::validate() const {
  if (resolution < 2 || !std::has_single_bit(static_cast<unsigned>(resolution))) {
    throw std::invalid_argument("model resolution must be a power of two >= 2");
  }
  if (past_frames < 1) throw std::invalid_argument("model needs at least one input frame");
  if (feature_dim < 1 || heads < 1 || feature_dim % heads != 0) {
    throw std::invalid_argument("feature_dim must be a positive multiple of heads");
  }
  if (layers < 0) throw std::invalid_argument("transformer layers must be >= 0");
  if (encoder_widths.empty()) throw std::invalid_argument("encoder widths must not be empty");
  for (int w : encoder_widths) {
    if (w < 1) throw std::invalid_argument("encoder widths must be positive");
  }
}

int ModelConfig::stages() const { return std::countr_zero(static_cast<unsigned>(resolution)); }

int ModelConfig::width(int stage) const {
  const auto i = std::min(static_cast<std::size_t>(stage), encoder_widths.size() - 1);
  return encoder_widths[i];
}

std::vector<SpanLevel> ModelConfig::output_levels() const {
  if (single_task_level) return {*single_task_level};
  return {kAllLevels.begin(), kAllLevels.end()};
}

ModelConfig model_config_for(const SampleSpec& spec) {
  ModelConfig cfg;
  cfg.resolution = spec.cfg.resolution;
  cfg.past_frames = spec.past_frames();
  return cfg;
}

const OccupancyGrid* Forecast::grid(SpanLevel level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return &binarized[i];
  }
  return nullptr;
}

std::span<const double> Forecast::soft_level(SpanLevel level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return std::span<const double>(soft).subspan(i * cells(), cells());
  }
  return {};
}

Forecast make_forecast(std::vector<SpanLevel> levels, std::vector<double> soft, const OccupancyGrid& like,
                       double threshold) {
  Forecast f;
  f.resolution = like.resolution();
  f.cube_length = like.cube_length();
  f.origin = like.origin();
  const std::size_t n = f.cells();
  if (soft.size() != levels.size() * n) throw std::invalid_argument("forecast: soft size mismatch");
  f.levels = std::move(levels);
  f.soft = std::move(soft);
  for (std::size_t l = 0; l < f.levels.size(); ++l) {
    OccupancyGrid g(f.resolution, f.cube_length, f.origin);
    for (std::size_t c = 0; c < n; ++c) {
      if (f.soft[l * n + c] >= threshold) g.set(c);
    }
    f.binarized.push_back(std::move(g));
  }
  return f;
}

Forecaster::Forecaster(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int s_count = cfg_.stages();
  for (int s = 0; s < s_count; ++s) {
    const int ci = s == 0 ? static_cast<int>(kInputChannels) : cfg_.width(s - 1);
    const std::string p = "encoder.stage" + std::to_string(s);
    blocks_.enc_w.push_back(params_.add(p + ".conv.weight", {cfg_.width(s), ci, 3, 3, 3}));
    blocks_.enc_b.push_back(params_.add(p + ".conv.bias", {cfg_.width(s)}));
  }
  const int top = cfg_.width(s_count - 1);
  blocks_.proj_w = params_.add("encoder.project.weight", {cfg_.feature_dim, top});
  blocks_.proj_b = params_.add("encoder.project.bias", {cfg_.feature_dim});
  blocks_.pos = params_.add("temporal.position", {cfg_.tokens(), cfg_.feature_dim});
  blocks_.transformer = nn::register_transformer(params_, transformer_shape(), "temporal");
  blocks_.head_w = params_.add("decoder.head.weight", {top, cfg_.feature_dim});
  blocks_.head_b = params_.add("decoder.head.bias", {top});
  blocks_.up_w.resize(static_cast<std::size_t>(s_count));
  blocks_.up_b.resize(static_cast<std::size_t>(s_count));
  blocks_.norm_g.resize(static_cast<std::size_t>(s_count));
  blocks_.norm_b.resize(static_cast<std::size_t>(s_count));
  blocks_.ref_w.assign(static_cast<std::size_t>(s_count), 0);
  blocks_.ref_b.assign(static_cast<std::size_t>(s_count), 0);
  for (int s = s_count - 1; s >= 0; --s) {
    const int ci = s == s_count - 1 ? top : cfg_.width(s + 1);
    const int co = cfg_.width(s);
    const std::string p = "decoder.stage" + std::to_string(s);
    blocks_.up_w[static_cast<std::size_t>(s)] = params_.add(p + ".up.weight", {ci, co, 2, 2, 2});
    blocks_.up_b[static_cast<std::size_t>(s)] = params_.add(p + ".up.bias", {co});
    blocks_.norm_g[static_cast<std::size_t>(s)] = params_.add(p + ".norm.gain", {co});
    blocks_.norm_b[static_cast<std::size_t>(s)] = params_.add(p + ".norm.bias", {co});
    if (has_refine(s)) {
      blocks_.ref_w[static_cast<std::size_t>(s)] = params_.add(p + ".refine.weight", {co, co, 3, 3, 3});
      blocks_.ref_b[static_cast<std::size_t>(s)] = params_.add(p + ".refine.bias", {co});
    }
  }
  blocks_.out_w = params_.add("decoder.out.weight", {cfg_.levels_out(), cfg_.width(0)});
  blocks_.out_b = params_.add("decoder.out.bias", {cfg_.levels_out()});
  initialise();
}

nn::TransformerShape Forecaster::transformer_shape() const {
  nn::TransformerShape t;
  t.dim = cfg_.feature_dim;
  t.layers = cfg_.layers;
  t.heads = cfg_.heads;
  t.hidden = 2 * cfg_.feature_dim;
  return t;
}

void Forecaster::initialise() {
  Rng rng(mix_seed(cfg_.seed, 0xF0CA));
  for (std::size_t i = 0; i < params_.blocks().size(); ++i) {
    const auto& b = params_.block(i);
    auto v = params_.view(i);
    const bool is_gain = b.name.ends_with(".gain");
    const bool is_bias = b.name.ends_with(".bias");
    if (is_gain) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (is_bias) {
      std::fill(v.begin(), v.end(), 0.0);
    } else if (b.name == "temporal.position") {
      fill_normal(v, rng, 0.1);
    } else {
      // Fan-in scaled normal. Transposed convs see one input tap per output.
      std::size_t fan_in = b.size / static_cast<std::size_t>(b.shape[0]);
      if (b.name.ends_with(".up.weight")) fan_in = static_cast<std::size_t>(b.shape[0]);
      fill_normal(v, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
    }
  }
  // Start from a low occupancy prior so early dice gradients are informative.
  auto ob = params_.view(blocks_.out_b);
  std::fill(ob.begin(), ob.end(), -2.0);
  snap_to_float(params_);
}

std::vector<double> Forecaster::input_tensor(const SpanSample& sample) const {
  if (static_cast<int>(sample.inputs.size()) != cfg_.past_frames) {
    throw GeometryMismatch("forecaster: sample has " + std::to_string(sample.inputs.size()) +
                           " input frames, model expects " + std::to_string(cfg_.past_frames));
  }
  const std::size_t n = cube(cfg_.resolution);
  Vec out(static_cast<std::size_t>(cfg_.past_frames) * kInputChannels * n, 0.0);
  for (std::size_t f = 0; f < sample.inputs.size(); ++f) {
    for (std::size_t c = 0; c < kInputChannels; ++c) {
      const auto& g = sample.inputs[f][c];
      if (g.resolution() != cfg_.resolution) {
        throw GeometryMismatch("forecaster: grid resolution " + std::to_string(g.resolution()) +
                               " vs model resolution " + std::to_string(cfg_.resolution));
      }
      if (!cfg_.use_history && c != kSceneChannel) continue;
      double* dst = out.data() + (f * kInputChannels + c) * n;
      for (auto cell : g.set_cells()) dst[cell] = 1.0;
    }
  }
  return out;
}

std::vector<double> Forecaster::target_tensor(const SpanSample& sample) const {
  const std::size_t n = cube(cfg_.resolution);
  const auto levels = cfg_.output_levels();
  Vec out(levels.size() * n, 0.0);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& g = sample.target[static_cast<std::size_t>(levels[l])];
    if (g.resolution() != cfg_.resolution) throw GeometryMismatch("forecaster: target resolution mismatch");
    for (auto cell : g.set_cells()) out[l * n + cell] = 1.0;
  }
  return out;
}

EncoderPass Forecaster::encode_volume(std::span<const double> volume) const {
  const int s_count = cfg_.stages();
  if (volume.size() != kInputChannels * cube(cfg_.resolution)) {
    throw GeometryMismatch("forecaster: encoder input has wrong size");
  }
  EncoderPass e;
  e.input.resize(static_cast<std::size_t>(s_count));
  e.pre.resize(static_cast<std::size_t>(s_count));
  e.skip.resize(static_cast<std::size_t>(s_count));
  e.input[0].assign(volume.begin(), volume.end());
  int n = cfg_.resolution;
  for (int s = 0; s < s_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const int ci = s == 0 ? static_cast<int>(kInputChannels) : cfg_.width(s - 1);
    const int co = cfg_.width(s);
    e.pre[si].assign(static_cast<std::size_t>(co) * cube(n), 0.0);
    nn::conv3_forward(e.input[si], ci, n, params_.view(blocks_.enc_w[si]), params_.view(blocks_.enc_b[si]), co,
                      e.pre[si]);
    e.skip[si].assign(e.pre[si].size(), 0.0);
    nn::silu_forward(e.pre[si], e.skip[si]);
    Vec pooled(static_cast<std::size_t>(co) * cube(n / 2));
    nn::avgpool2_forward(e.skip[si], co, n, pooled);
    if (s + 1 < s_count) {
      e.input[si + 1] = std::move(pooled);
    } else {
      e.pooled = std::move(pooled);
    }
    n /= 2;
  }
  const int top = cfg_.width(s_count - 1);
  e.embedding.assign(static_cast<std::size_t>(cfg_.feature_dim), 0.0);
  nn::linear_forward(e.pooled, top, params_.view(blocks_.proj_w), params_.view(blocks_.proj_b), cfg_.feature_dim,
                     e.embedding);
  return e;
}

std::vector<EncoderPass> Forecaster::encode(std::span<const double> input) const {
  const std::size_t vol = kInputChannels * cube(cfg_.resolution);
  if (input.size() != static_cast<std::size_t>(cfg_.past_frames) * vol) {
    throw GeometryMismatch("forecaster: input tensor has wrong size");
  }
  std::vector<EncoderPass> out;
  for (int f = 0; f < cfg_.past_frames; ++f) out.push_back(encode_volume(input.subspan(f * vol, vol)));
  if (cfg_.use_global_embedding) {
    Vec uni(vol, 0.0);
    for (int f = 0; f < cfg_.past_frames; ++f) {
      for (std::size_t i = 0; i < vol; ++i) uni[i] = std::max(uni[i], input[f * vol + i]);
    }
    out.push_back(encode_volume(uni));
  }
  return out;
}

std::vector<double> Forecaster::temporal_fuse(std::span<const double> tokens, int count,
                                              nn::TransformerCache* cache) const {
  Vec y(tokens.size(), 0.0);
  nn::transformer_forward(params_, blocks_.transformer, transformer_shape(), tokens, count, y, cache);
  return y;
}

DecoderPass Forecaster::decode(std::span<const double> head, const EncoderPass& skips) const {
  const int s_count = cfg_.stages();
  const int top = cfg_.width(s_count - 1);
  DecoderPass d;
  d.head.assign(head.begin(), head.end());
  d.z.resize(static_cast<std::size_t>(s_count) + 1);
  d.resid.resize(static_cast<std::size_t>(s_count));
  d.normed.resize(static_cast<std::size_t>(s_count));
  d.norm_mean.resize(static_cast<std::size_t>(s_count));
  d.norm_inv_std.resize(static_cast<std::size_t>(s_count));
  d.gated.resize(static_cast<std::size_t>(s_count));
  d.refine.resize(static_cast<std::size_t>(s_count));
  auto& zs = d.z[static_cast<std::size_t>(s_count)];
  zs.assign(static_cast<std::size_t>(top), 0.0);
  nn::linear_forward(d.head, cfg_.feature_dim, params_.view(blocks_.head_w), params_.view(blocks_.head_b), top, zs);

  for (int s = s_count - 1; s >= 0; --s) {
    const auto si = static_cast<std::size_t>(s);
    const int n = cfg_.resolution >> s;
    const int ci = s == s_count - 1 ? top : cfg_.width(s + 1);
    const int co = cfg_.width(s);
    const std::size_t size = static_cast<std::size_t>(co) * cube(n);
    d.resid[si].assign(size, 0.0);
    nn::upconv2_forward(d.z[si + 1], ci, n / 2, params_.view(blocks_.up_w[si]), params_.view(blocks_.up_b[si]), co,
                        d.resid[si]);
    for (std::size_t i = 0; i < size; ++i) d.resid[si][i] += skips.skip[si][i];
    // Residual sums grow stage by stage without this; the logits then saturate.
    d.normed[si].assign(size, 0.0);
    d.norm_mean[si].assign(cube(n), 0.0);
    d.norm_inv_std[si].assign(cube(n), 0.0);
    nn::channelnorm_forward(d.resid[si], co, static_cast<int>(cube(n)), params_.view(blocks_.norm_g[si]),
                            params_.view(blocks_.norm_b[si]), d.normed[si], d.norm_mean[si], d.norm_inv_std[si]);
    d.gated[si].assign(size, 0.0);
    nn::silu_forward(d.normed[si], d.gated[si]);
    if (has_refine(s)) {
      d.refine[si].assign(size, 0.0);
      nn::conv3_forward(d.gated[si], co, n, params_.view(blocks_.ref_w[si]), params_.view(blocks_.ref_b[si]), co,
                        d.refine[si]);
      Vec act(size);
      nn::silu_forward(d.refine[si], act);
      d.z[si].resize(size);
      for (std::size_t i = 0; i < size; ++i) d.z[si][i] = d.gated[si][i] + act[i];
    } else {
      d.z[si] = d.gated[si];
    }
  }
  const std::size_t n0 = cube(cfg_.resolution);
  d.prob.assign(static_cast<std::size_t>(cfg_.levels_out()) * n0, 0.0);
  nn::conv1_forward(d.z[0], cfg_.width(0), static_cast<int>(n0), params_.view(blocks_.out_w),
                    params_.view(blocks_.out_b), cfg_.levels_out(), d.prob);
  for (auto& v : d.prob) v = nn::sigmoid(v);
  return d;
}

const EncoderPass& Forecaster::skip_source(const ForwardPass& pass) const {
  return pass.encodings.back();
}

void Forecaster::forward(std::span<const double> input, ForwardPass& pass) const {
  pass.encodings = encode(input);
  const int t = cfg_.tokens();
  const auto c = static_cast<std::size_t>(cfg_.feature_dim);
  pass.tokens.assign(static_cast<std::size_t>(t) * c, 0.0);
  const auto pos = params_.view(blocks_.pos);
  for (int i = 0; i < t; ++i) {
    const auto& e = pass.encodings[static_cast<std::size_t>(i)].embedding;
    for (std::size_t j = 0; j < c; ++j) pass.tokens[i * c + j] = e[j] + pos[i * c + j];
  }
  pass.fused = temporal_fuse(pass.tokens, t, &pass.transformer);
  pass.decoder = decode(std::span<const double>(pass.fused).subspan((t - 1) * c, c), skip_source(pass));
}

double Forecaster::loss(const ForwardPass& pass, std::span<const double> target, std::span<double> d_prob) const {
  if (cfg_.loss == LossKind::dice) return dice_loss(pass.decoder.prob, target, cfg_.levels_out(), d_prob);
  return bce_loss(pass.decoder.prob, target, d_prob);
}

void Forecaster::backward(const ForwardPass& pass, std::span<const double> d_prob, std::vector<double>& grad) const {
  if (grad.size() != params_.total()) grad.assign(params_.total(), 0.0);
  const int s_count = cfg_.stages();
  const int top = cfg_.width(s_count - 1);
  const auto& d = pass.decoder;
  const std::size_t n0 = cube(cfg_.resolution);

  // Decoder.
  Vec d_logit(d.prob.size());
  for (std::size_t i = 0; i < d.prob.size(); ++i) d_logit[i] = d_prob[i] * d.prob[i] * (1.0 - d.prob[i]);
  Vec d_z(d.z[0].size(), 0.0);
  nn::conv1_backward(d.z[0], cfg_.width(0), static_cast<int>(n0), params_.view(blocks_.out_w), cfg_.levels_out(),
                     d_logit, params_.slice(grad, blocks_.out_w), params_.slice(grad, blocks_.out_b), d_z);

  std::vector<Vec> d_skip(static_cast<std::size_t>(s_count));
  for (int s = 0; s < s_count; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const int n = cfg_.resolution >> s;
    const int ci = s == s_count - 1 ? top : cfg_.width(s + 1);
    const int co = cfg_.width(s);
    const std::size_t size = static_cast<std::size_t>(co) * cube(n);
    Vec d_gated = d_z;
    if (has_refine(s)) {
      Vec d_ref(size, 0.0);
      nn::silu_backward(d.refine[si], d_z, d_ref);
      nn::conv3_backward(d.gated[si], co, n, params_.view(blocks_.ref_w[si]), co, d_ref,
                         params_.slice(grad, blocks_.ref_w[si]), params_.slice(grad, blocks_.ref_b[si]), d_gated);
    }
    Vec d_normed(size, 0.0);
    nn::silu_backward(d.normed[si], d_gated, d_normed);
    Vec d_resid(size, 0.0);
    nn::channelnorm_backward(d.resid[si], co, static_cast<int>(cube(n)), params_.view(blocks_.norm_g[si]),
                             d.norm_mean[si], d.norm_inv_std[si], d_normed, params_.slice(grad, blocks_.norm_g[si]),
                             params_.slice(grad, blocks_.norm_b[si]), d_resid);
    d_skip[si] = d_resid;
    Vec d_next(d.z[si + 1].size(), 0.0);
    nn::upconv2_backward(d.z[si + 1], ci, n / 2, params_.view(blocks_.up_w[si]), co, d_resid,
                         params_.slice(grad, blocks_.up_w[si]), params_.slice(grad, blocks_.up_b[si]), d_next);
    d_z = std::move(d_next);
  }
  const int t = cfg_.tokens();
  const auto c = static_cast<std::size_t>(cfg_.feature_dim);
  Vec d_head(c, 0.0);
  nn::linear_backward(d.head, cfg_.feature_dim, params_.view(blocks_.head_w), top, d_z,
                      params_.slice(grad, blocks_.head_w), params_.slice(grad, blocks_.head_b), d_head);

  // Transformer: only the last position feeds the decoder.
  Vec d_fused(static_cast<std::size_t>(t) * c, 0.0);
  std::copy(d_head.begin(), d_head.end(), d_fused.begin() + static_cast<std::ptrdiff_t>((t - 1) * c));
  Vec d_tokens(d_fused.size(), 0.0);
  nn::transformer_backward(params_, blocks_.transformer, transformer_shape(), pass.transformer, d_fused, grad,
                           d_tokens);
  auto d_pos = params_.slice(grad, blocks_.pos);
  for (std::size_t i = 0; i < d_tokens.size(); ++i) d_pos[i] += d_tokens[i];

  // Encoders; the skip source also receives the decoder's residual gradients.
  for (int k = 0; k < t; ++k) {
    const auto& e = pass.encodings[static_cast<std::size_t>(k)];
    const bool is_skip = k == t - 1;
    Vec d_pooled(e.pooled.size(), 0.0);
    nn::linear_backward(e.pooled, top, params_.view(blocks_.proj_w), cfg_.feature_dim,
                        std::span<const double>(d_tokens).subspan(k * c, c), params_.slice(grad, blocks_.proj_w),
                        params_.slice(grad, blocks_.proj_b), d_pooled);
    for (int s = s_count - 1; s >= 0; --s) {
      const auto si = static_cast<std::size_t>(s);
      const int n = cfg_.resolution >> s;
      const int ci = s == 0 ? static_cast<int>(kInputChannels) : cfg_.width(s - 1);
      const int co = cfg_.width(s);
      Vec d_act(e.skip[si].size(), 0.0);
      nn::avgpool2_backward(co, n, d_pooled, d_act);
      if (is_skip) {
        for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] += d_skip[si][i];
      }
      Vec d_pre(d_act.size(), 0.0);
      nn::silu_backward(e.pre[si], d_act, d_pre);
      Vec d_in;
      if (s > 0) d_in.assign(e.input[si].size(), 0.0);
      nn::conv3_backward(e.input[si], ci, n, params_.view(blocks_.enc_w[si]), co, d_pre,
                         params_.slice(grad, blocks_.enc_w[si]), params_.slice(grad, blocks_.enc_b[si]), d_in);
      d_pooled = std::move(d_in);
    }
  }
}

Forecast Forecaster::predict(const SpanSample& sample, double threshold) const {
  ForwardPass pass;
  forward(input_tensor(sample), pass);
  return make_forecast(cfg_.output_levels(), std::move(pass.decoder.prob), sample.target[0], threshold);
}

void snap_to_float(nn::Parameters& params) {
  for (auto& v : params.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace fovs
