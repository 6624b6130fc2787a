#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fovs/forecaster.hpp"

namespace fovs {

double dice_loss(std::span<const double> pred, std::span<const double> target, int levels, std::span<double> grad) {
  if (pred.size() != target.size()) throw std::invalid_argument("dice_loss: shape mismatch");
  if (levels < 1 || pred.size() % static_cast<std::size_t>(levels) != 0) {
    throw std::invalid_argument("dice_loss: size not divisible by level count");
  }
  if (!grad.empty() && grad.size() != pred.size()) throw std::invalid_argument("dice_loss: gradient shape mismatch");
  const std::size_t n = pred.size() / static_cast<std::size_t>(levels);
  double total = 0.0;
  for (int l = 0; l < levels; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * n;
    double inter = 0.0, sp = 0.0, sy = 0.0;
    for (std::size_t i = base; i < base + n; ++i) {
      inter += pred[i] * target[i];
      sp += pred[i];
      sy += target[i];
    }
    const double den = sp + sy + 1.0;
    total += 1.0 - 2.0 * inter / den;
    if (!grad.empty()) {
      const double scale = -2.0 / (den * den * levels);
      for (std::size_t i = base; i < base + n; ++i) grad[i] += scale * (target[i] * den - inter);
    }
  }
  return total / levels;
}

double bce_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  if (pred.size() != target.size() || pred.empty()) throw std::invalid_argument("bce_loss: shape mismatch");
  if (!grad.empty() && grad.size() != pred.size()) throw std::invalid_argument("bce_loss: gradient shape mismatch");
  constexpr double kLo = 1e-7;
  constexpr double kHi = 1.0 - 1e-7;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kLo, kHi);
    const double y = target[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (!grad.empty() && pred[i] > kLo && pred[i] < kHi) grad[i] += inv_n * (p - y) / (p * (1.0 - p));
  }
  return total * inv_n;
}

}  // namespace fovs
