#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fovs/dataset.hpp"
#include "fovs/tensor_ops.hpp"
#include "fovs/transformer.hpp"

namespace fovs {

enum class LossKind : std::uint8_t { dice = 0, bce = 1 };

const char* loss_name(LossKind kind);
LossKind parse_loss(const std::string& name);

struct ModelConfig {
  int resolution = 16;
  int past_frames = 2;
  int feature_dim = 64;
  /// Per-stage widths; extended with the last value up to log2(resolution) stages.
  std::vector<int> encoder_widths{8, 16, 32};
  int layers = 2;
  int heads = 4;
  /// Set for the single-task variant; the model then predicts only this level.
  std::optional<SpanLevel> single_task_level;
  bool use_global_embedding = true;
  bool use_history = true;
  LossKind loss = LossKind::dice;
  std::uint64_t seed = 0;

  void validate() const;
  int stages() const;
  int width(int stage) const;
  int levels_out() const { return single_task_level ? 1 : static_cast<int>(kNumLevels); }
  std::vector<SpanLevel> output_levels() const;
  int tokens() const { return past_frames + (use_global_embedding ? 1 : 0); }

  bool operator==(const ModelConfig&) const = default;
};

/// Default model for a sample spec (resolution and T_p taken from it).
ModelConfig model_config_for(const SampleSpec& spec);

struct Forecast {
  std::vector<SpanLevel> levels;
  int resolution = 0;
  double cube_length = 0.0;
  Vec3 origin = Vec3::Zero();
  /// levels.size() x R^3 values in (0,1), x-major like OccupancyGrid.
  std::vector<double> soft;
  /// soft >= threshold per level.
  std::vector<OccupancyGrid> binarized;

  std::size_t cells() const { return static_cast<std::size_t>(resolution) * resolution * resolution; }
  /// Binarized grid for a level, or nullptr if the forecast does not cover it.
  const OccupancyGrid* grid(SpanLevel level) const;
  /// Soft values for a level, empty if not covered.
  std::span<const double> soft_level(SpanLevel level) const;
};

/// Thresholds `soft` into grids shaped like `like`.
Forecast make_forecast(std::vector<SpanLevel> levels, std::vector<double> soft, const OccupancyGrid& like,
                       double threshold = 0.5);

// ---------------------------------------------------------------------------
// Losses. Both return the scalar loss and, when `grad` is non-empty,
// accumulate d loss / d pred into it.
// ---------------------------------------------------------------------------

/// Mean over `levels` equal chunks of 1 - 2 sum(p y) / (sum p + sum y + 1).
double dice_loss(std::span<const double> pred, std::span<const double> target, int levels = 1,
                 std::span<double> grad = {});
/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad = {});

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Activations of one encoder pass over a 5 x R^3 volume.
struct EncoderPass {
  std::vector<std::vector<double>> input;  // stage inputs, [0] is the raw volume
  std::vector<std::vector<double>> pre;    // conv outputs
  std::vector<std::vector<double>> skip;   // silu(pre), kept for the decoder
  std::vector<double> pooled;              // final 1^3 features
  std::vector<double> embedding;           // C
};

struct DecoderPass {
  std::vector<double> head;                 // C
  std::vector<std::vector<double>> z;       // z[s], s = 0..S; z[S] is the projected head
  std::vector<std::vector<double>> resid;   // upconv + skip
  std::vector<std::vector<double>> normed;  // channel norm of resid
  std::vector<std::vector<double>> norm_mean, norm_inv_std;
  std::vector<std::vector<double>> gated;   // silu(normed)
  std::vector<std::vector<double>> refine;  // conv pre-activation (coarse stages only)
  std::vector<double> prob;                 // levels_out x R^3
};

struct ForwardPass {
  std::vector<EncoderPass> encodings;  // T_p frames, then the union volume if used
  std::vector<double> tokens;          // T x C, embeddings plus positions
  nn::TransformerCache transformer;
  std::vector<double> fused;           // T x C
  DecoderPass decoder;
};

class Forecaster {
 public:
  explicit Forecaster(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::Parameters& parameters() { return params_; }
  const nn::Parameters& parameters() const { return params_; }

  /// T_p x 5 x R^3 scalars in {0,1}. The level channels are zeroed when
  /// use_history is off. Throws GeometryMismatch on shape disagreement.
  std::vector<double> input_tensor(const SpanSample& sample) const;
  /// levels_out x R^3 scalars in {0,1}.
  std::vector<double> target_tensor(const SpanSample& sample) const;

  /// Encodes a single 5 x R^3 volume.
  EncoderPass encode_volume(std::span<const double> volume) const;
  /// Per-frame encodings followed by the union encoding when the global
  /// embedding is enabled. Output embeddings are (T_p [+1]) x C.
  std::vector<EncoderPass> encode(std::span<const double> input) const;
  /// Transformer over a token matrix; returns all T x C outputs.
  std::vector<double> temporal_fuse(std::span<const double> tokens, int count,
                                    nn::TransformerCache* cache = nullptr) const;
  /// Decoder from the fused head embedding and the skip source encoding.
  DecoderPass decode(std::span<const double> head, const EncoderPass& skips) const;

  void forward(std::span<const double> input, ForwardPass& pass) const;
  /// Accumulates d loss / d params into grad (same length as parameters).
  void backward(const ForwardPass& pass, std::span<const double> d_prob, std::vector<double>& grad) const;

  /// Loss for a finished forward pass; fills d_prob when non-empty.
  double loss(const ForwardPass& pass, std::span<const double> target, std::span<double> d_prob = {}) const;

  Forecast predict(const SpanSample& sample, double threshold = 0.5) const;

  /// Encoder output that feeds the decoder skips.
  const EncoderPass& skip_source(const ForwardPass& pass) const;

 private:
  struct Blocks {
    std::vector<std::size_t> enc_w, enc_b;
    std::size_t proj_w = 0, proj_b = 0;
    std::size_t pos = 0;
    nn::TransformerBlocks transformer;
    std::size_t head_w = 0, head_b = 0;
    std::vector<std::size_t> up_w, up_b;        // per stage
    std::vector<std::size_t> norm_g, norm_b;    // per stage
    std::vector<std::size_t> ref_w, ref_b;      // per stage, unused at stage 0
    std::size_t out_w = 0, out_b = 0;
  };

  void initialise();
  nn::TransformerShape transformer_shape() const;

  ModelConfig cfg_;
  nn::Parameters params_;
  Blocks blocks_;
};

/// Rounds every parameter to float precision.
void snap_to_float(nn::Parameters& params);

// ---------------------------------------------------------------------------
// Checkpoint: magic "FVSM", version, config block, named f32 parameter blobs.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Forecaster& model);
Forecaster load_checkpoint(const std::filesystem::path& path);

}  // namespace fovs
