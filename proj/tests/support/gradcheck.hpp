#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fovs/forecaster.hpp"
#include "fovs/random.hpp"

namespace fovs::testing {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is at the level of finite-difference round-off from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct BlockCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel = 0.0;
};

/// Central differences against Forecaster::backward for up to `per_block`
/// coordinates of every parameter block (all of them for small blocks).
inline std::vector<BlockCheck> check_forecaster_gradients(Forecaster& model, const std::vector<double>& input,
                                                          const std::vector<double>& target, std::size_t per_block,
                                                          std::uint64_t seed, double h = 1e-5) {
  ForwardPass pass;
  model.forward(input, pass);
  std::vector<double> d_prob(pass.decoder.prob.size(), 0.0);
  model.loss(pass, target, d_prob);
  std::vector<double> grad(model.parameters().total(), 0.0);
  model.backward(pass, d_prob, grad);

  const auto loss_at = [&] {
    ForwardPass p;
    model.forward(input, p);
    return model.loss(p, target);
  };

  Rng rng(seed);
  std::vector<BlockCheck> out;
  auto& values = model.parameters().values();
  for (const auto& b : model.parameters().blocks()) {
    BlockCheck check{b.name, 0, 0.0};
    std::vector<std::size_t> coords;
    if (b.size <= per_block) {
      for (std::size_t i = 0; i < b.size; ++i) coords.push_back(b.offset + i);
    } else {
      for (std::size_t i = 0; i < per_block; ++i) coords.push_back(b.offset + rng.below(b.size));
    }
    for (std::size_t c : coords) {
      const double saved = values[c];
      values[c] = saved + h;
      const double up = loss_at();
      values[c] = saved - h;
      const double down = loss_at();
      values[c] = saved;
      const double numeric = (up - down) / (2.0 * h);
      check.max_rel = std::max(check.max_rel, relative_error(grad[c], numeric));
      ++check.checked;
    }
    out.push_back(check);
  }
  return out;
}

}  // namespace fovs::testing
