// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "jdagg/encoder.hpp"
#include "jdagg/error.hpp"
#include "jdagg/nn.hpp"
#include "jdagg/optim.hpp"
#include "jdagg/rng.hpp"
#include "jdagg/tensor.hpp"

namespace jdagg {

struct AggregatorConfig {
  std::size_t dim = 64;
  std::size_t layers = 4;
  std::size_t heads = 2;
};

void validate(const AggregatorConfig& config);

// The description aggregator: a learnable summary token is prepended to the
// segment embeddings, the sequence is layer-normalized and run through a
// shallow transformer encoder, and a 3-layer ReLU MLP maps the transformed
// summary position to the unified representation f. Segment positions carry
// no positional encoding, so the aggregator treats segments as a set.
template <typename T>
struct AggregatorParamsT {
  AggregatorConfig config;
  TensorT<T> g_cls;  // 1 x d summary token
  TensorT<T> input_ln_gamma, input_ln_beta;
  std::vector<nn::TransformerLayerParamsT<T>> layers;
  TensorT<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;  // d->d->d->d
};

using AggregatorParams = AggregatorParamsT<float>;

// The unified description representation f produced by the aggregator head.
using UnifiedRepresentation = std::vector<float>;

// Summary token and transformer weights ~ N(0, 0.02^2), MLP head
// ~ N(0, 1/d), biases 0, LayerNorm gamma=1 beta=0. The draw order is fixed
// (g_cls, per-layer attn/ffn, mlp) so checkpoints reproduce.
template <typename T>
AggregatorParamsT<T> init_aggregator(const AggregatorConfig& config, Rng& rng) {
  validate(config);
  constexpr double kInitStd = 0.02;
  const std::size_t d = config.dim;
  AggregatorParamsT<T> p;
  p.config = config;
  p.g_cls = TensorT<T>::randn(1, d, kInitStd, rng);
  p.input_ln_gamma = TensorT<T>::zeros(1, d);
  p.input_ln_gamma.fill(T(1));
  p.input_ln_beta = TensorT<T>::zeros(1, d);
  p.layers.resize(config.layers);
  for (auto& layer : p.layers) {
    layer.attn.wq = TensorT<T>::randn(d, d, kInitStd, rng);
    layer.attn.wk = TensorT<T>::randn(d, d, kInitStd, rng);
    layer.attn.wv = TensorT<T>::randn(d, d, kInitStd, rng);
    layer.attn.wo = TensorT<T>::randn(d, d, kInitStd, rng);
    layer.ln1_gamma = TensorT<T>::zeros(1, d);
    layer.ln1_gamma.fill(T(1));
    layer.ln1_beta = TensorT<T>::zeros(1, d);
    layer.ffn_w1 = TensorT<T>::randn(d, 4 * d, kInitStd, rng);
    layer.ffn_b1 = TensorT<T>::zeros(1, 4 * d);
    layer.ffn_w2 = TensorT<T>::randn(4 * d, d, kInitStd, rng);
    layer.ffn_b2 = TensorT<T>::zeros(1, d);
    layer.ln2_gamma = TensorT<T>::zeros(1, d);
    layer.ln2_gamma.fill(T(1));
    layer.ln2_beta = TensorT<T>::zeros(1, d);
  }
  // The head keeps unit scale (sigma = 1/sqrt(d)); at 0.02 the stacked MLP
  // collapses |f| to ~1e-3 and the cosine gradients blow up AdamW's second
  // moments, stalling training at desk scale.
  const double head_std = 1.0 / std::sqrt(static_cast<double>(d));
  p.mlp_w1 = TensorT<T>::randn(d, d, head_std, rng);
  p.mlp_b1 = TensorT<T>::zeros(1, d);
  p.mlp_w2 = TensorT<T>::randn(d, d, head_std, rng);
  p.mlp_b2 = TensorT<T>::zeros(1, d);
  p.mlp_w3 = TensorT<T>::randn(d, d, head_std, rng);
  p.mlp_b3 = TensorT<T>::zeros(1, d);
  return p;
}

// Named refs over (params, grads) pairs; the order defines the checkpoint
// blob layout and the optimizer walk.
template <typename T>
std::vector<nn::ParamRef<T>> param_refs(AggregatorParamsT<T>& params,
                                        AggregatorParamsT<T>& grads) {
  std::vector<nn::ParamRef<T>> refs;
  const auto add = [&](const std::string& name, TensorT<T>& v, TensorT<T>& g) {
    refs.push_back(nn::ParamRef<T>{name, &v, &g});
  };
  add("g_cls", params.g_cls, grads.g_cls);
  add("input_ln.gamma", params.input_ln_gamma, grads.input_ln_gamma);
  add("input_ln.beta", params.input_ln_beta, grads.input_ln_beta);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    add(prefix + "attn.wq", params.layers[l].attn.wq, grads.layers[l].attn.wq);
    add(prefix + "attn.wk", params.layers[l].attn.wk, grads.layers[l].attn.wk);
    add(prefix + "attn.wv", params.layers[l].attn.wv, grads.layers[l].attn.wv);
    add(prefix + "attn.wo", params.layers[l].attn.wo, grads.layers[l].attn.wo);
    add(prefix + "ln1.gamma", params.layers[l].ln1_gamma, grads.layers[l].ln1_gamma);
    add(prefix + "ln1.beta", params.layers[l].ln1_beta, grads.layers[l].ln1_beta);
    add(prefix + "ffn.w1", params.layers[l].ffn_w1, grads.layers[l].ffn_w1);
    add(prefix + "ffn.b1", params.layers[l].ffn_b1, grads.layers[l].ffn_b1);
    add(prefix + "ffn.w2", params.layers[l].ffn_w2, grads.layers[l].ffn_w2);
    add(prefix + "ffn.b2", params.layers[l].ffn_b2, grads.layers[l].ffn_b2);
    add(prefix + "ln2.gamma", params.layers[l].ln2_gamma, grads.layers[l].ln2_gamma);
    add(prefix + "ln2.beta", params.layers[l].ln2_beta, grads.layers[l].ln2_beta);
  }
  add("mlp.w1", params.mlp_w1, grads.mlp_w1);
  add("mlp.b1", params.mlp_b1, grads.mlp_b1);
  add("mlp.w2", params.mlp_w2, grads.mlp_w2);
  add("mlp.b2", params.mlp_b2, grads.mlp_b2);
  add("mlp.w3", params.mlp_w3, grads.mlp_w3);
  add("mlp.b3", params.mlp_b3, grads.mlp_b3);
  return refs;
}

template <typename T>
AggregatorParamsT<T> zero_grads_like(const AggregatorParamsT<T>& params) {
  AggregatorParamsT<T> g;
  g.config = params.config;
  g.g_cls = TensorT<T>::zeros_like(params.g_cls);
  g.input_ln_gamma = TensorT<T>::zeros_like(params.input_ln_gamma);
  g.input_ln_beta = TensorT<T>::zeros_like(params.input_ln_beta);
  g.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& src = params.layers[l];
    auto& dst = g.layers[l];
    dst.attn.wq = TensorT<T>::zeros_like(src.attn.wq);
    dst.attn.wk = TensorT<T>::zeros_like(src.attn.wk);
    dst.attn.wv = TensorT<T>::zeros_like(src.attn.wv);
    dst.attn.wo = TensorT<T>::zeros_like(src.attn.wo);
    dst.ln1_gamma = TensorT<T>::zeros_like(src.ln1_gamma);
    dst.ln1_beta = TensorT<T>::zeros_like(src.ln1_beta);
    dst.ffn_w1 = TensorT<T>::zeros_like(src.ffn_w1);
    dst.ffn_b1 = TensorT<T>::zeros_like(src.ffn_b1);
    dst.ffn_w2 = TensorT<T>::zeros_like(src.ffn_w2);
    dst.ffn_b2 = TensorT<T>::zeros_like(src.ffn_b2);
    dst.ln2_gamma = TensorT<T>::zeros_like(src.ln2_gamma);
    dst.ln2_beta = TensorT<T>::zeros_like(src.ln2_beta);
  }
  g.mlp_w1 = TensorT<T>::zeros_like(params.mlp_w1);
  g.mlp_b1 = TensorT<T>::zeros_like(params.mlp_b1);
  g.mlp_w2 = TensorT<T>::zeros_like(params.mlp_w2);
  g.mlp_b2 = TensorT<T>::zeros_like(params.mlp_b2);
  g.mlp_w3 = TensorT<T>::zeros_like(params.mlp_w3);
  g.mlp_b3 = TensorT<T>::zeros_like(params.mlp_b3);
  return g;
}

// Closed-form parameter count as a function of (d, L, heads-independent).
inline std::size_t aggregator_parameter_count(const AggregatorConfig& c) {
  const std::size_t d = c.dim;
  const std::size_t per_layer = 12 * d * d + 9 * d;  // 4 attn mats + ffn + 2 LN
  return d + 2 * d + c.layers * per_layer + 3 * (d * d + d);
}

template <typename T>
struct AggregateCache {
  TensorT<T> seq;  // (n+1) x d, summary token prepended
  nn::LayerNormCache<T> input_ln;
  TensorT<T> normed;
  std::vector<nn::TransformerLayerCache<T>> layers;
  TensorT<T> encoded;   // (n+1) x d after the stack
  TensorT<T> mlp_x;     // 1 x d summary position
  TensorT<T> mlp_pre1, mlp_act1, mlp_pre2, mlp_act2;
};

// f = MLP(TransformerEncoder(LayerNorm([g_cls; G]))[0]). Differentiable
// through every weight including the summary token.
template <typename T>
TensorT<T> aggregate_forward(const TensorT<T>& g, const AggregatorParamsT<T>& p,
                             std::type_identity_t<AggregateCache<T>>* cache) {
  const std::size_t d = p.config.dim;
  if (g.cols() != d) throw CompatError("aggregate: segment dim != aggregator dim");
  if (g.rows() == 0) throw InputError("aggregate: empty segment matrix");

  AggregateCache<T> local;
  AggregateCache<T>& c = cache ? *cache : local;
  const std::size_t n = g.rows();
  c.seq = TensorT<T>::zeros(n + 1, d);
  for (std::size_t j = 0; j < d; ++j) c.seq.at(0, j) = p.g_cls.values[j];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) c.seq.at(i + 1, j) = g.at(i, j);
  }

  c.normed = nn::layer_norm_forward(c.seq, p.input_ln_gamma, p.input_ln_beta, &c.input_ln);
  c.layers.resize(p.layers.size());
  TensorT<T> x = c.normed;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    x = nn::transformer_layer_forward(x, p.layers[l], p.config.heads, &c.layers[l]);
  }
  c.encoded = std::move(x);

  c.mlp_x = TensorT<T>::zeros(1, d);
  for (std::size_t j = 0; j < d; ++j) c.mlp_x.at(0, j) = c.encoded.at(0, j);
  c.mlp_pre1 = nn::linear_forward(c.mlp_x, p.mlp_w1, p.mlp_b1);
  c.mlp_act1 = nn::relu(c.mlp_pre1);
  c.mlp_pre2 = nn::linear_forward(c.mlp_act1, p.mlp_w2, p.mlp_b2);
  c.mlp_act2 = nn::relu(c.mlp_pre2);
  return nn::linear_forward(c.mlp_act2, p.mlp_w3, p.mlp_b3);
}

// Accumulates parameter gradients; returns dG for completeness (unused when
// the sentence encoder is frozen).
template <typename T>
TensorT<T> aggregate_backward(const AggregateCache<T>& cache, const AggregatorParamsT<T>& p,
                              const TensorT<T>& df, AggregatorParamsT<T>& grads) {
  const std::size_t d = p.config.dim;
  TensorT<T> dact2 = nn::linear_backward(cache.mlp_act2, p.mlp_w3, df, grads.mlp_w3, grads.mlp_b3);
  TensorT<T> dpre2 = nn::relu_backward(cache.mlp_pre2, dact2);
  TensorT<T> dact1 =
      nn::linear_backward(cache.mlp_act1, p.mlp_w2, dpre2, grads.mlp_w2, grads.mlp_b2);
  TensorT<T> dpre1 = nn::relu_backward(cache.mlp_pre1, dact1);
  TensorT<T> dmlp_x =
      nn::linear_backward(cache.mlp_x, p.mlp_w1, dpre1, grads.mlp_w1, grads.mlp_b1);

  TensorT<T> dx = TensorT<T>::zeros(cache.encoded.rows(), d);
  for (std::size_t j = 0; j < d; ++j) dx.at(0, j) = dmlp_x.at(0, j);
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    dx = nn::transformer_layer_backward(p.layers[l], p.config.heads, cache.layers[l], dx,
                                        grads.layers[l]);
  }
  TensorT<T> dseq = nn::layer_norm_backward(cache.input_ln, p.input_ln_gamma, dx,
                                            grads.input_ln_gamma, grads.input_ln_beta);

  for (std::size_t j = 0; j < d; ++j) {
    grads.g_cls.values[j] = static_cast<T>(static_cast<double>(grads.g_cls.values[j]) +
                                           static_cast<double>(dseq.at(0, j)));
  }
  TensorT<T> dg = TensorT<T>::zeros(cache.seq.rows() - 1, d);
  for (std::size_t i = 0; i < dg.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) dg.at(i, j) = dseq.at(i + 1, j);
  }
  return dg;
}

// Float-facing convenience over EmbeddingMatrix inputs.
UnifiedRepresentation aggregate(const EmbeddingMatrix& segments, const AggregatorParams& params);

// Importance scores per segment: the summary-token attention row of the
// first layer, averaged over heads, self entry dropped, renormalized to 1.
std::vector<float> attention_map(const EmbeddingMatrix& segments, const AggregatorParams& params);

// Sentence-level pooling baselines (column-wise over segment rows).
std::vector<float> mean_pool_aggregate(const EmbeddingMatrix& segments);
std::vector<float> max_pool_aggregate(const EmbeddingMatrix& segments);

// Whole-description baseline: the untruncated text encoded as one sentence.
std::vector<float> document_level_encode(const std::string& description,
                                         const HashEncoderConfig& config);

// Skill-based encoders: concatenation with a separator token (the shipped
// choice), plus the mean/max pooling variants over per-skill vectors.
std::vector<float> skill_concat_encode(const std::vector<std::string>& skills,
                                       const std::string& separator,
                                       const HashEncoderConfig& config);
std::vector<float> skill_mean_encode(const std::vector<std::string>& skills,
                                     const HashEncoderConfig& config);
std::vector<float> skill_max_encode(const std::vector<std::string>& skills,
                                    const HashEncoderConfig& config);

Tensor to_tensor(const EmbeddingMatrix& m);

}  // namespace jdagg
