#include "fovs/transformer.hpp"

#include <cmath>
#include <stdexcept>

namespace fovs::nn {
namespace {

using Vec = std::vector<double>;

void rows_linear(CSpan x, int rows, int in, CSpan w, CSpan b, int out, Span y) {
  for (int r = 0; r < rows; ++r) {
    linear_forward(x.subspan(static_cast<std::size_t>(r) * in, static_cast<std::size_t>(in)), in, w, b, out,
                   y.subspan(static_cast<std::size_t>(r) * out, static_cast<std::size_t>(out)));
  }
}

void rows_linear_backward(CSpan x, int rows, int in, CSpan w, int out, CSpan d_y, Span d_w, Span d_b, Span d_x) {
  for (int r = 0; r < rows; ++r) {
    linear_backward(x.subspan(static_cast<std::size_t>(r) * in, static_cast<std::size_t>(in)), in, w, out,
                    d_y.subspan(static_cast<std::size_t>(r) * out, static_cast<std::size_t>(out)), d_w, d_b,
                    d_x.subspan(static_cast<std::size_t>(r) * in, static_cast<std::size_t>(in)));
  }
}

// probs is [H][T][T]; entries with j > i stay exactly zero.
void causal_attention(const Vec& q, const Vec& k, const Vec& v, int t, int dim, int heads, Vec& probs, Vec& ctx) {
  const int dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  probs.assign(static_cast<std::size_t>(heads) * t * t, 0.0);
  ctx.assign(static_cast<std::size_t>(t) * dim, 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < t; ++i) {
      double* p = probs.data() + (static_cast<std::size_t>(h) * t + i) * t;
      double best = -INFINITY;
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int d = 0; d < dh; ++d) s += q[i * dim + h * dh + d] * k[j * dim + h * dh + d];
        p[j] = s * scale;
        best = std::max(best, p[j]);
      }
      double z = 0.0;
      for (int j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - best);
        z += p[j];
      }
      for (int j = 0; j <= i; ++j) p[j] /= z;
      for (int j = 0; j <= i; ++j) {
        for (int d = 0; d < dh; ++d) ctx[i * dim + h * dh + d] += p[j] * v[j * dim + h * dh + d];
      }
    }
  }
}

void causal_attention_backward(const Vec& q, const Vec& k, const Vec& v, const Vec& probs, int t, int dim,
                               int heads, const Vec& d_ctx, Vec& d_q, Vec& d_k, Vec& d_v) {
  const int dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Vec d_p(static_cast<std::size_t>(t));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < t; ++i) {
      const double* p = probs.data() + (static_cast<std::size_t>(h) * t + i) * t;
      double dot = 0.0;
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (int d = 0; d < dh; ++d) {
          s += d_ctx[i * dim + h * dh + d] * v[j * dim + h * dh + d];
          d_v[j * dim + h * dh + d] += p[j] * d_ctx[i * dim + h * dh + d];
        }
        d_p[j] = s;
        dot += p[j] * s;
      }
      for (int j = 0; j <= i; ++j) {
        const double ds = p[j] * (d_p[j] - dot) * scale;
        for (int d = 0; d < dh; ++d) {
          d_q[i * dim + h * dh + d] += ds * k[j * dim + h * dh + d];
          d_k[j * dim + h * dh + d] += ds * q[i * dim + h * dh + d];
        }
      }
    }
  }
}

}  // namespace

TransformerBlocks register_transformer(Parameters& params, const TransformerShape& shape,
                                       const std::string& prefix) {
  if (shape.dim <= 0 || shape.heads <= 0 || shape.dim % shape.heads != 0) {
    throw std::invalid_argument("transformer: feature dim must be a positive multiple of the head count");
  }
  if (shape.layers < 0 || shape.hidden <= 0) throw std::invalid_argument("transformer: bad layer shape");
  const int c = shape.dim;
  const int m = shape.hidden;
  TransformerBlocks b;
  for (int l = 0; l < shape.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l) + ".";
    TransformerBlocks::Layer L{};
    L.ln1_g = params.add(p + "ln1.gain", {c});
    L.ln1_b = params.add(p + "ln1.bias", {c});
    L.wq = params.add(p + "attn.q.weight", {c, c});
    L.bq = params.add(p + "attn.q.bias", {c});
    L.wk = params.add(p + "attn.k.weight", {c, c});
    L.bk = params.add(p + "attn.k.bias", {c});
    L.wv = params.add(p + "attn.v.weight", {c, c});
    L.bv = params.add(p + "attn.v.bias", {c});
    L.wo = params.add(p + "attn.out.weight", {c, c});
    L.bo = params.add(p + "attn.out.bias", {c});
    L.ln2_g = params.add(p + "ln2.gain", {c});
    L.ln2_b = params.add(p + "ln2.bias", {c});
    L.w1 = params.add(p + "mlp.fc1.weight", {m, c});
    L.b1 = params.add(p + "mlp.fc1.bias", {m});
    L.w2 = params.add(p + "mlp.fc2.weight", {c, m});
    L.b2 = params.add(p + "mlp.fc2.bias", {c});
    b.layers.push_back(L);
  }
  b.lnf_g = params.add(prefix + ".final_ln.gain", {c});
  b.lnf_b = params.add(prefix + ".final_ln.bias", {c});
  return b;
}

void transformer_forward(const Parameters& params, const TransformerBlocks& blocks, const TransformerShape& shape,
                         CSpan x, int tokens, Span y, TransformerCache* cache) {
  const int c = shape.dim;
  const int m = shape.hidden;
  const int t = tokens;
  const auto tc = static_cast<std::size_t>(t) * c;
  if (x.size() != tc || y.size() != tc) throw std::invalid_argument("transformer: token matrix shape mismatch");

  TransformerCache local;
  TransformerCache& cc = cache != nullptr ? *cache : local;
  cc.tokens = t;
  cc.layers.resize(blocks.layers.size());
  Vec cur(x.begin(), x.end());
  for (std::size_t l = 0; l < blocks.layers.size(); ++l) {
    const auto& L = blocks.layers[l];
    auto& K = cc.layers[l];
    K.x_in = cur;
    K.ln1.assign(tc, 0.0);
    K.ln1_mean.assign(static_cast<std::size_t>(t), 0.0);
    K.ln1_istd.assign(static_cast<std::size_t>(t), 0.0);
    layernorm_forward(K.x_in, t, c, params.view(L.ln1_g), params.view(L.ln1_b), K.ln1, K.ln1_mean, K.ln1_istd);
    K.q.assign(tc, 0.0);
    K.k.assign(tc, 0.0);
    K.v.assign(tc, 0.0);
    rows_linear(K.ln1, t, c, params.view(L.wq), params.view(L.bq), c, K.q);
    rows_linear(K.ln1, t, c, params.view(L.wk), params.view(L.bk), c, K.k);
    rows_linear(K.ln1, t, c, params.view(L.wv), params.view(L.bv), c, K.v);
    causal_attention(K.q, K.k, K.v, t, c, shape.heads, K.probs, K.ctx);
    Vec attn(tc);
    rows_linear(K.ctx, t, c, params.view(L.wo), params.view(L.bo), c, attn);
    K.x_mid.assign(tc, 0.0);
    for (std::size_t i = 0; i < tc; ++i) K.x_mid[i] = K.x_in[i] + attn[i];

    K.ln2.assign(tc, 0.0);
    K.ln2_mean.assign(static_cast<std::size_t>(t), 0.0);
    K.ln2_istd.assign(static_cast<std::size_t>(t), 0.0);
    layernorm_forward(K.x_mid, t, c, params.view(L.ln2_g), params.view(L.ln2_b), K.ln2, K.ln2_mean, K.ln2_istd);
    const auto tm = static_cast<std::size_t>(t) * m;
    K.h_pre.assign(tm, 0.0);
    K.h_act.assign(tm, 0.0);
    rows_linear(K.ln2, t, c, params.view(L.w1), params.view(L.b1), m, K.h_pre);
    silu_forward(K.h_pre, K.h_act);
    Vec mlp(tc);
    rows_linear(K.h_act, t, m, params.view(L.w2), params.view(L.b2), c, mlp);
    for (std::size_t i = 0; i < tc; ++i) cur[i] = K.x_mid[i] + mlp[i];
  }
  cc.x_final = cur;
  cc.lnf_mean.assign(static_cast<std::size_t>(t), 0.0);
  cc.lnf_istd.assign(static_cast<std::size_t>(t), 0.0);
  layernorm_forward(cc.x_final, t, c, params.view(blocks.lnf_g), params.view(blocks.lnf_b), y, cc.lnf_mean,
                    cc.lnf_istd);
}

void transformer_backward(const Parameters& params, const TransformerBlocks& blocks, const TransformerShape& shape,
                          const TransformerCache& cache, CSpan d_y, std::vector<double>& grad, Span d_x) {
  const int c = shape.dim;
  const int m = shape.hidden;
  const int t = cache.tokens;
  const auto tc = static_cast<std::size_t>(t) * c;
  const auto tm = static_cast<std::size_t>(t) * m;

  Vec d_cur(tc, 0.0);
  layernorm_backward(cache.x_final, t, c, params.view(blocks.lnf_g), cache.lnf_mean, cache.lnf_istd, d_y,
                     params.slice(grad, blocks.lnf_g), params.slice(grad, blocks.lnf_b), d_cur);

  for (std::size_t l = blocks.layers.size(); l-- > 0;) {
    const auto& L = blocks.layers[l];
    const auto& K = cache.layers[l];
    // x_out = x_mid + fc2(silu(fc1(ln2(x_mid))))
    Vec d_mid = d_cur;
    Vec d_act(tm, 0.0);
    rows_linear_backward(K.h_act, t, m, params.view(L.w2), c, d_cur, params.slice(grad, L.w2),
                         params.slice(grad, L.b2), d_act);
    Vec d_pre(tm, 0.0);
    silu_backward(K.h_pre, d_act, d_pre);
    Vec d_ln2(tc, 0.0);
    rows_linear_backward(K.ln2, t, c, params.view(L.w1), m, d_pre, params.slice(grad, L.w1),
                         params.slice(grad, L.b1), d_ln2);
    layernorm_backward(K.x_mid, t, c, params.view(L.ln2_g), K.ln2_mean, K.ln2_istd, d_ln2,
                       params.slice(grad, L.ln2_g), params.slice(grad, L.ln2_b), d_mid);

    // x_mid = x_in + out(attn(ln1(x_in)))
    Vec d_in = d_mid;
    Vec d_ctx(tc, 0.0);
    rows_linear_backward(K.ctx, t, c, params.view(L.wo), c, d_mid, params.slice(grad, L.wo),
                         params.slice(grad, L.bo), d_ctx);
    Vec d_q(tc, 0.0), d_k(tc, 0.0), d_v(tc, 0.0);
    causal_attention_backward(K.q, K.k, K.v, K.probs, t, c, shape.heads, d_ctx, d_q, d_k, d_v);
    Vec d_ln1(tc, 0.0);
    rows_linear_backward(K.ln1, t, c, params.view(L.wq), c, d_q, params.slice(grad, L.wq),
                         params.slice(grad, L.bq), d_ln1);
    rows_linear_backward(K.ln1, t, c, params.view(L.wk), c, d_k, params.slice(grad, L.wk),
                         params.slice(grad, L.bk), d_ln1);
    rows_linear_backward(K.ln1, t, c, params.view(L.wv), c, d_v, params.slice(grad, L.wv),
                         params.slice(grad, L.bv), d_ln1);
    layernorm_backward(K.x_in, t, c, params.view(L.ln1_g), K.ln1_mean, K.ln1_istd, d_ln1,
                       params.slice(grad, L.ln1_g), params.slice(grad, L.ln1_b), d_in);
    d_cur = std::move(d_in);
  }
  for (std::size_t i = 0; i < tc; ++i) d_x[i] += d_cur[i];
}

}  // namespace fovs::nn
