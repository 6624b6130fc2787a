#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fovs/forecaster.hpp"

namespace fovs {

/// Raised when the training loss becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  int epoch = 0;
  std::size_t steps = 0;  // cumulative optimizer steps
  double train_loss = 0.0;
  /// Per output level, empty without a validation set.
  std::vector<double> val_iou;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
};

struct TrainOptions {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Stop after this many optimizer steps.
  std::optional<std::size_t> max_steps;
  /// Workers for per-sample gradients within a batch (0: worker_count()).
  int workers = 0;
  /// Validation after every epoch; otherwise only after the last.
  bool validate_every_epoch = true;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Forecaster model;
  TrainReport report;
};

/// Adam on per-batch mean gradients. Each batch's per-sample gradients are
/// reduced in sample order, and parameters are rounded to float after each
/// step, so results depend only on the seed and the data.
TrainResult train(const std::vector<SpanSample>& samples, const std::vector<std::size_t>& train_indices,
                  const std::vector<std::size_t>& val_indices, const ModelConfig& config,
                  const TrainOptions& options = {});

/// Mean loss of the model over the given samples.
double mean_loss(const Forecaster& model, const std::vector<SpanSample>& samples,
                 const std::vector<std::size_t>& indices, int workers = 0);

/// Mean IoU per output level at threshold 0.5.
std::vector<double> validation_iou(const Forecaster& model, const std::vector<SpanSample>& samples,
                                   const std::vector<std::size_t>& indices, int workers = 0);

}  // namespace fovs
