#include "fovs/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "fovs/metrics.hpp"
#include "fovs/parallel.hpp"
#include "fovs/random.hpp"

namespace fovs {
namespace {

void check_geometry(const ModelConfig& cfg, const SpanSample& s) {
  if (static_cast<int>(s.inputs.size()) != cfg.past_frames) {
    throw GeometryMismatch("train: sample frame count " + std::to_string(s.inputs.size()) +
                           " differs from model T_p " + std::to_string(cfg.past_frames));
  }
  if (s.target[0].resolution() != cfg.resolution) {
    throw GeometryMismatch("train: sample resolution " + std::to_string(s.target[0].resolution()) +
                           " differs from model resolution " + std::to_string(cfg.resolution));
  }
}

}  // namespace

double mean_loss(const Forecaster& model, const std::vector<SpanSample>& samples,
                 const std::vector<std::size_t>& indices, int workers) {
  if (indices.empty()) throw std::invalid_argument("mean_loss: no samples");
  std::vector<double> losses(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto& s = samples.at(indices[i]);
        ForwardPass pass;
        model.forward(model.input_tensor(s), pass);
        losses[i] = model.loss(pass, model.target_tensor(s));
      },
      workers);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

std::vector<double> validation_iou(const Forecaster& model, const std::vector<SpanSample>& samples,
                                   const std::vector<std::size_t>& indices, int workers) {
  const auto levels = model.config().output_levels();
  if (indices.empty()) return {};
  std::vector<std::vector<double>> per(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto& s = samples.at(indices[i]);
        const Forecast f = model.predict(s);
        for (std::size_t l = 0; l < levels.size(); ++l) {
          per[i].push_back(grid_metrics(f.binarized[l], s.target[static_cast<std::size_t>(levels[l])]).iou);
        }
      },
      workers);
  std::vector<double> out(levels.size(), 0.0);
  for (const auto& row : per) {
    for (std::size_t l = 0; l < levels.size(); ++l) out[l] += row[l];
  }
  for (auto& v : out) v /= static_cast<double>(indices.size());
  return out;
}

TrainResult train(const std::vector<SpanSample>& samples, const std::vector<std::size_t>& train_indices,
                  const std::vector<std::size_t>& val_indices, const ModelConfig& config,
                  const TrainOptions& options) {
  if (train_indices.empty()) throw std::invalid_argument("train: empty training split");
  if (options.epochs < 1 || options.batch_size < 1) throw std::invalid_argument("train: epochs and batch must be >= 1");
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  for (auto i : train_indices) check_geometry(config, samples.at(i));
  for (auto i : val_indices) check_geometry(config, samples.at(i));

  TrainResult result{Forecaster(config), {}};
  Forecaster& model = result.model;
  auto& theta = model.parameters().values();
  const std::size_t p = theta.size();
  std::vector<double> m(p, 0.0), v(p, 0.0), g(p, 0.0);
  const auto batch = static_cast<std::size_t>(options.batch_size);
  std::vector<std::vector<double>> sample_grad(batch, std::vector<double>(p, 0.0));
  std::vector<double> sample_loss(batch, 0.0);

  std::vector<std::size_t> order = train_indices;
  std::size_t step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < options.epochs && !stop; ++epoch) {
    Rng rng(mix_seed(config.seed, 0x7A11 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t start = 0; start < order.size() && !stop; start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      parallel_for(
          count,
          [&](std::size_t k) {
            const auto& s = samples[order[start + k]];
            ForwardPass pass;
            model.forward(model.input_tensor(s), pass);
            const auto target = model.target_tensor(s);
            std::vector<double> d_prob(target.size(), 0.0);
            sample_loss[k] = model.loss(pass, target, d_prob);
            std::fill(sample_grad[k].begin(), sample_grad[k].end(), 0.0);
            model.backward(pass, d_prob, sample_grad[k]);
          },
          options.workers);

      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(sample_loss[k])) {
          std::ostringstream os;
          os << "training diverged: non-finite loss at epoch " << epoch << ", step " << step << ", sample "
             << samples[order[start + k]].recording_id << "@" << samples[order[start + k]].sample_time;
          throw TrainingDiverged(os.str());
        }
        epoch_loss += sample_loss[k];
        for (std::size_t j = 0; j < p; ++j) g[j] += sample_grad[k][j];
      }
      epoch_samples += count;

      ++step;
      const double inv = 1.0 / static_cast<double>(count);
      const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < p; ++j) {
        const double gj = g[j] * inv;
        if (!std::isfinite(gj)) throw TrainingDiverged("training diverged: non-finite gradient at step " +
                                                       std::to_string(step));
        m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * gj;
        v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * gj * gj;
        const double update = options.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + options.epsilon);
        theta[j] = static_cast<double>(static_cast<float>(theta[j] - update));
      }
      if (options.max_steps && step >= *options.max_steps) stop = true;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = step;
    rec.train_loss = epoch_loss / static_cast<double>(epoch_samples);
    const bool last = stop || epoch + 1 == options.epochs;
    if (!val_indices.empty() && (options.validate_every_epoch || last)) {
      rec.val_iou = validation_iou(model, samples, val_indices, options.workers);
    }
    result.report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.report.steps = step;
  return result;
}

}  // namespace fovs
