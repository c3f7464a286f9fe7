// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>
#include <vector>

#include "jdagg/error.hpp"
#include "jdagg/tensor.hpp"

// Dense layers with hand-written reverse-mode gradients. Every kernel is
// templated on the scalar type: float is the production storage width,
// double instantiations back the finite-difference oracle. Reductions
// accumulate in double for both.
namespace jdagg::nn {

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.cols() != b.rows()) throw NumericError("matmul: inner dimensions disagree");
  TensorT<T> y = TensorT<T>::zeros(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<double>(a.at(i, k)) * static_cast<double>(b.at(k, j));
      }
      y.at(i, j) = static_cast<T>(acc);
    }
  }
  return y;
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::zeros(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) y.at(j, i) = a.at(i, j);
  }
  return y;
}

template <typename T>
void add_inplace(TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw NumericError("add: shape mismatch");
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

// y = x W + b. b has one entry per output column; pass an empty tensor for
// a bias-free projection (attention weights).
template <typename T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.cols() != w.rows()) throw NumericError("linear: x.cols != W.rows");
  TensorT<T> y = matmul(x, w);
  if (!b.values.empty()) {
    if (b.numel() != w.cols()) throw NumericError("linear: bias length != W.cols");
    for (std::size_t i = 0; i < y.rows(); ++i) {
      for (std::size_t j = 0; j < y.cols(); ++j) y.at(i, j) += b.values[j];
    }
  }
  JDAGG_DCHECK_FINITE(y);
  return y;
}

// Accumulates dW and db, returns dx.
template <typename T>
TensorT<T> linear_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                           TensorT<T>& dw, TensorT<T>& db) {
  add_inplace(dw, matmul(transpose(x), dy));
  if (!db.values.empty()) {
    for (std::size_t j = 0; j < dy.cols(); ++j) {
      double acc = static_cast<double>(db.values[j]);
      for (std::size_t i = 0; i < dy.rows(); ++i) acc += static_cast<double>(dy.at(i, j));
      db.values[j] = static_cast<T>(acc);
    }
  }
  return matmul(dy, transpose(w));
}

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct LayerNormCache {
  TensorT<T> x_hat;             // normalized rows before gamma/beta
  std::vector<double> inv_std;  // per row
};

// Row-wise normalization over the last axis, then y = gamma .* x_hat + beta.
template <typename T>
TensorT<T> layer_norm_forward(const TensorT<T>& x, const TensorT<T>& gamma,
                              const TensorT<T>& beta,
                              std::type_identity_t<LayerNormCache<T>>* cache,
                              double eps = kLayerNormEps) {
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw NumericError("layer_norm: gamma/beta size != feature dim");
  }
  TensorT<T> y = TensorT<T>::zeros(x.rows(), d);
  TensorT<T> x_hat = TensorT<T>::zeros(x.rows(), d);
  std::vector<double> inv_stds(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += static_cast<double>(x.at(i, j));
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = static_cast<double>(x.at(i, j)) - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    inv_stds[i] = inv_std;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (static_cast<double>(x.at(i, j)) - mean) * inv_std;
      x_hat.at(i, j) = static_cast<T>(xh);
      y.at(i, j) = static_cast<T>(xh * static_cast<double>(gamma.values[j]) +
                                  static_cast<double>(beta.values[j]));
    }
  }
  JDAGG_DCHECK_FINITE(y);
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_stds);
  }
  return y;
}

// Accumulates dgamma/dbeta, returns dx.
// dx = inv_std/D * (D*dxh - sum(dxh) - x_hat * sum(dxh .* x_hat))
template <typename T>
TensorT<T> layer_norm_backward(const LayerNormCache<T>& cache, const TensorT<T>& gamma,
                               const TensorT<T>& dy, TensorT<T>& dgamma, TensorT<T>& dbeta) {
  const std::size_t rows = cache.x_hat.rows();
  const std::size_t d = cache.x_hat.cols();
  TensorT<T> dx = TensorT<T>::zeros(rows, d);
  for (std::size_t i = 0; i < rows; ++i) {
    double sum_dxh = 0.0;
    double sum_dxh_xh = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dyv = static_cast<double>(dy.at(i, j));
      const double xh = static_cast<double>(cache.x_hat.at(i, j));
      dgamma.values[j] = static_cast<T>(static_cast<double>(dgamma.values[j]) + dyv * xh);
      dbeta.values[j] = static_cast<T>(static_cast<double>(dbeta.values[j]) + dyv);
      const double dxh = dyv * static_cast<double>(gamma.values[j]);
      sum_dxh += dxh;
      sum_dxh_xh += dxh * xh;
    }
    const double scale = cache.inv_std[i] / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double dxh =
          static_cast<double>(dy.at(i, j)) * static_cast<double>(gamma.values[j]);
      const double xh = static_cast<double>(cache.x_hat.at(i, j));
      dx.at(i, j) = static_cast<T>(
          scale * (static_cast<double>(d) * dxh - sum_dxh - xh * sum_dxh_xh));
    }
  }
  return dx;
}

// Row-wise softmax with max subtraction; rows are shift-invariant
// distributions summing to 1.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& x) {
  TensorT<T> p = TensorT<T>::zeros(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double max_v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j) {
      max_v = std::max(max_v, static_cast<double>(x.at(i, j)));
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      denom += std::exp(static_cast<double>(x.at(i, j)) - max_v);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
      p.at(i, j) = static_cast<T>(std::exp(static_cast<double>(x.at(i, j)) - max_v) / denom);
    }
  }
  JDAGG_DCHECK_FINITE(p);
  return p;
}

// dx[i,j] = p[i,j] * (dp[i,j] - sum_k dp[i,k] p[i,k])
template <typename T>
TensorT<T> softmax_rows_backward(const TensorT<T>& p, const TensorT<T>& dp) {
  TensorT<T> dx = TensorT<T>::zeros(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      dot += static_cast<double>(dp.at(i, j)) * static_cast<double>(p.at(i, j));
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
      dx.at(i, j) = static_cast<T>(static_cast<double>(p.at(i, j)) *
                                   (static_cast<double>(dp.at(i, j)) - dot));
    }
  }
  return dx;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.values) v = v > T(0) ? v : T(0);
  return y;
}

// Subgradient 0 at exactly 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
  TensorT<T> dx = dy;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    if (x.values[i] <= T(0)) dx.values[i] = T(0);
  }
  return dx;
}

template <typename T>
struct AttentionParamsT {
  TensorT<T> wq, wk, wv, wo;  // all d x d, no biases
};

template <typename T>
struct AttentionCache {
  TensorT<T> q, k, v;               // n x d
  std::vector<TensorT<T>> probs;    // per head, n x n softmax rows
  TensorT<T> context;               // n x d, heads concatenated, before Wo
};

namespace detail {

template <typename T>
TensorT<T> head_slice(const TensorT<T>& m, std::size_t head, std::size_t head_dim) {
  TensorT<T> out = TensorT<T>::zeros(m.rows(), head_dim);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < head_dim; ++j) out.at(i, j) = m.at(i, head * head_dim + j);
  }
  return out;
}

template <typename T>
void head_unslice(TensorT<T>& m, const TensorT<T>& part, std::size_t head,
                  std::size_t head_dim) {
  for (std::size_t i = 0; i < part.rows(); ++i) {
    for (std::size_t j = 0; j < head_dim; ++j) {
      m.at(i, head * head_dim + j) += part.at(i, j);
    }
  }
}

}  // namespace detail

// Full bidirectional attention over all positions (no masking):
// per head, A = softmax(Q Kt / sqrt(d/heads)), Y = concat(A V) Wo.
template <typename T>
TensorT<T> multi_head_attention_forward(const TensorT<T>& x, const AttentionParamsT<T>& p,
                                        std::size_t heads,
                                        std::type_identity_t<AttentionCache<T>>* cache) {
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) throw NumericError("attention: dim not divisible by heads");
  const std::size_t head_dim = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  TensorT<T> empty_bias;
  TensorT<T> q = linear_forward(x, p.wq, empty_bias);
  TensorT<T> k = linear_forward(x, p.wk, empty_bias);
  TensorT<T> v = linear_forward(x, p.wv, empty_bias);

  TensorT<T> context = TensorT<T>::zeros(x.rows(), d);
  std::vector<TensorT<T>> probs;
  probs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    TensorT<T> qh = detail::head_slice(q, h, head_dim);
    TensorT<T> kh = detail::head_slice(k, h, head_dim);
    TensorT<T> vh = detail::head_slice(v, h, head_dim);
    TensorT<T> scores = matmul(qh, transpose(kh));
    for (auto& s : scores.values) s *= scale;
    TensorT<T> a = softmax_rows(scores);
    TensorT<T> ctx_h = matmul(a, vh);
    detail::head_unslice(context, ctx_h, h, head_dim);
    probs.push_back(std::move(a));
  }
  TensorT<T> y = linear_forward(context, p.wo, empty_bias);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return y;
}

// Accumulates all four weight gradients, returns dx.
template <typename T>
TensorT<T> multi_head_attention_backward(const TensorT<T>& x, const AttentionParamsT<T>& p,
                                         std::size_t heads, const AttentionCache<T>& cache,
                                         const TensorT<T>& dy, AttentionParamsT<T>& grads) {
  const std::size_t d = x.cols();
  const std::size_t head_dim = d / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  // y = context Wo
  TensorT<T> empty_bias;
  TensorT<T> dcontext = linear_backward(cache.context, p.wo, dy, grads.wo, empty_bias);

  TensorT<T> dq = TensorT<T>::zeros(x.rows(), d);
  TensorT<T> dk = TensorT<T>::zeros(x.rows(), d);
  TensorT<T> dv = TensorT<T>::zeros(x.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    TensorT<T> dctx_h = detail::head_slice(dcontext, h, head_dim);
    TensorT<T> kh = detail::head_slice(cache.k, h, head_dim);
    TensorT<T> vh = detail::head_slice(cache.v, h, head_dim);
    TensorT<T> qh = detail::head_slice(cache.q, h, head_dim);
    const TensorT<T>& a = cache.probs[h];

    TensorT<T> da = matmul(dctx_h, transpose(vh));
    TensorT<T> dvh = matmul(transpose(a), dctx_h);
    TensorT<T> dscores = softmax_rows_backward(a, da);
    for (auto& s : dscores.values) s *= scale;
    TensorT<T> dqh = matmul(dscores, kh);
    TensorT<T> dkh = matmul(transpose(dscores), qh);

    detail::head_unslice(dq, dqh, h, head_dim);
    detail::head_unslice(dk, dkh, h, head_dim);
    detail::head_unslice(dv, dvh, h, head_dim);
  }

  TensorT<T> dx = linear_backward(x, p.wq, dq, grads.wq, empty_bias);
  add_inplace(dx, linear_backward(x, p.wk, dk, grads.wk, empty_bias));
  add_inplace(dx, linear_backward(x, p.wv, dv, grads.wv, empty_bias));
  return dx;
}

template <typename T>
struct TransformerLayerParamsT {
  AttentionParamsT<T> attn;
  TensorT<T> ln1_gamma, ln1_beta;
  TensorT<T> ffn_w1, ffn_b1;  // d -> 4d
  TensorT<T> ffn_w2, ffn_b2;  // 4d -> d
  TensorT<T> ln2_gamma, ln2_beta;
};

template <typename T>
struct TransformerLayerCache {
  TensorT<T> x;
  AttentionCache<T> attn;
  TensorT<T> sum1;  // x + attn(x)
  LayerNormCache<T> ln1;
  TensorT<T> y1;    // LN(sum1)
  TensorT<T> ffn_pre;   // y1 W1 + b1
  TensorT<T> ffn_act;   // relu
  TensorT<T> sum2;      // y1 + ffn
  LayerNormCache<T> ln2;
};

// Post-norm residual layout: Y1 = LN(X + MHA(X)); Y = LN(Y1 + FFN(Y1)).
template <typename T>
TensorT<T> transformer_layer_forward(const TensorT<T>& x, const TransformerLayerParamsT<T>& p,
                                     std::size_t heads,
                                     std::type_identity_t<TransformerLayerCache<T>>* cache) {
  TransformerLayerCache<T> local;
  TransformerLayerCache<T>& c = cache ? *cache : local;
  c.x = x;
  TensorT<T> attn_out = multi_head_attention_forward(x, p.attn, heads, &c.attn);
  c.sum1 = x;
  add_inplace(c.sum1, attn_out);
  c.y1 = layer_norm_forward(c.sum1, p.ln1_gamma, p.ln1_beta, &c.ln1);

  c.ffn_pre = linear_forward(c.y1, p.ffn_w1, p.ffn_b1);
  c.ffn_act = relu(c.ffn_pre);
  TensorT<T> ffn_out = linear_forward(c.ffn_act, p.ffn_w2, p.ffn_b2);
  c.sum2 = c.y1;
  add_inplace(c.sum2, ffn_out);
  return layer_norm_forward(c.sum2, p.ln2_gamma, p.ln2_beta, &c.ln2);
}

template <typename T>
TensorT<T> transformer_layer_backward(const TransformerLayerParamsT<T>& p, std::size_t heads,
                                      const TransformerLayerCache<T>& cache,
                                      const TensorT<T>& dy, TransformerLayerParamsT<T>& grads) {
  TensorT<T> dsum2 =
      layer_norm_backward(cache.ln2, p.ln2_gamma, dy, grads.ln2_gamma, grads.ln2_beta);

  // sum2 = y1 + ffn(y1)
  TensorT<T> dffn_out = dsum2;
  TensorT<T> dffn_act =
      linear_backward(cache.ffn_act, p.ffn_w2, dffn_out, grads.ffn_w2, grads.ffn_b2);
  TensorT<T> dffn_pre = relu_backward(cache.ffn_pre, dffn_act);
  TensorT<T> dy1 = linear_backward(cache.y1, p.ffn_w1, dffn_pre, grads.ffn_w1, grads.ffn_b1);
  add_inplace(dy1, dsum2);

  TensorT<T> dsum1 =
      layer_norm_backward(cache.ln1, p.ln1_gamma, dy1, grads.ln1_gamma, grads.ln1_beta);

  // sum1 = x + attn(x)
  TensorT<T> dx =
      multi_head_attention_backward(cache.x, p.attn, heads, cache.attn, dsum1, grads.attn);
  add_inplace(dx, dsum1);
  return dx;
}

}  // namespace jdagg::nn
