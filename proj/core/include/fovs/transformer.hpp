#pragma once

// Pre-norm transformer over a short token sequence with a causal mask.
// Tokens are rows of a [T][C] matrix.

#include <vector>

#include "fovs/tensor_ops.hpp"

namespace fovs::nn {

struct TransformerShape {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int hidden = 128;
};

struct TransformerBlocks {
  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  std::size_t lnf_g = 0, lnf_b = 0;
};

TransformerBlocks register_transformer(Parameters& params, const TransformerShape& shape,
                                       const std::string& prefix);

struct TransformerCache {
  struct Layer {
    std::vector<double> x_in, ln1, ln1_mean, ln1_istd, q, k, v, probs, ctx;
    std::vector<double> x_mid, ln2, ln2_mean, ln2_istd, h_pre, h_act;
  };
  int tokens = 0;
  std::vector<Layer> layers;
  std::vector<double> x_final, lnf_mean, lnf_istd;
};

/// y = Transformer(x) for `tokens` rows. Attention from position i to j > i is
/// never computed, so row i of y depends only on rows 0..i of x.
void transformer_forward(const Parameters& params, const TransformerBlocks& blocks, const TransformerShape& shape,
                         CSpan x, int tokens, Span y, TransformerCache* cache);

/// Accumulates parameter gradients into `grad` and input gradients into d_x.
void transformer_backward(const Parameters& params, const TransformerBlocks& blocks, const TransformerShape& shape,
                          const TransformerCache& cache, CSpan d_y, std::vector<double>& grad, Span d_x);

}  // namespace fovs::nn
