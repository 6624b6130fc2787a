#include <benchmark/benchmark.h>

#include "fovs/forecaster.hpp"
#include "fovs/random.hpp"
#include "fovs/tensor_ops.hpp"

namespace {

using namespace fovs;

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

void BM_Conv3Forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int ci = static_cast<int>(state.range(1)), co = static_cast<int>(state.range(2));
  Rng rng(1);
  const std::size_t vol = static_cast<std::size_t>(n) * n * n;
  const auto in = random_vector(rng, ci * vol);
  const auto w = random_vector(rng, static_cast<std::size_t>(co * ci * 27));
  const auto b = random_vector(rng, co);
  std::vector<double> out(co * vol);
  for (auto _ : state) {
    nn::conv3_forward(in, ci, n, w, b, co, out);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Conv3Forward)->Args({16, 5, 8})->Args({8, 8, 16})->Args({16, 8, 8})->Unit(benchmark::kMicrosecond);

SpanSample random_sample(Rng& rng, int r, int frames) {
  SpanSample s;
  const OccupancyGrid like(r, 3.2, Vec3::Constant(-1.6));
  s.inputs.resize(static_cast<std::size_t>(frames));
  for (auto& f : s.inputs) {
    for (auto& g : f) {
      g = like;
      for (std::size_t c = 0; c < g.cell_count(); ++c)
        if (rng.uniform() < 0.05) g.set(c);
    }
  }
  for (auto& t : s.target) {
    t = like;
    for (std::size_t c = 0; c < t.cell_count(); ++c)
      if (rng.uniform() < 0.05) t.set(c);
  }
  return s;
}

void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  const Forecaster model(cfg);
  Rng rng(2);
  const auto input = model.input_tensor(random_sample(rng, cfg.resolution, cfg.past_frames));
  for (auto _ : state) {
    ForwardPass pass;
    model.forward(input, pass);
    benchmark::DoNotOptimize(pass.decoder.prob.data());
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  ModelConfig cfg;
  const Forecaster model(cfg);
  Rng rng(3);
  const auto sample = random_sample(rng, cfg.resolution, cfg.past_frames);
  const auto input = model.input_tensor(sample);
  const auto target = model.target_tensor(sample);
  std::vector<double> grad;
  for (auto _ : state) {
    ForwardPass pass;
    model.forward(input, pass);
    std::vector<double> d_prob(pass.decoder.prob.size(), 0.0);
    benchmark::DoNotOptimize(model.loss(pass, target, d_prob));
    std::fill(grad.begin(), grad.end(), 0.0);
    model.backward(pass, d_prob, grad);
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
