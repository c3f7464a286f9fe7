// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jdagg/nn.hpp"
#include "jdagg/optim.hpp"
#include "jdagg/rng.hpp"

using namespace jdagg;
using namespace jdagg::nn;

namespace {

using TensorD = TensorT<double>;

// Scalar probe: sum(R .* out) for a fixed random projection R, so the
// objective exercises every output coordinate.
TensorD random_probe(std::size_t rows, std::size_t cols, Rng& rng) {
  return TensorD::randn(rows, cols, 1.0, rng);
}

double probe_value(const TensorD& out, const TensorD& probe) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.values.size(); ++i) acc += out.values[i] * probe.values[i];
  return acc;
}

}  // namespace

TEST_CASE("linear basics") {
  Tensor x = Tensor::zeros(2, 3);
  x.values = {1, 2, 3, 4, 5, 6};
  Tensor w = Tensor::zeros(3, 3);
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0f;
  Tensor b = Tensor::zeros(1, 3);
  CHECK(linear_forward(x, w, b).values == x.values);

  Tensor x0 = Tensor::zeros(2, 3);
  b.values = {7, 8, 9};
  const Tensor y = linear_forward(x0, w, b);
  CHECK(y.values == std::vector<float>{7, 8, 9, 7, 8, 9});

  Tensor w_bad = Tensor::zeros(4, 2);
  CHECK_THROWS_AS(linear_forward(x, w_bad, b), NumericError);
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(0);
  TensorD x = TensorD::randn(3, 4, 1.0, rng);
  TensorD w = TensorD::randn(4, 2, 1.0, rng);
  TensorD b = TensorD::randn(1, 2, 1.0, rng);
  const TensorD probe = random_probe(3, 2, rng);

  TensorD dx_store = TensorD::zeros_like(x);
  TensorD dw = TensorD::zeros_like(w);
  TensorD db = TensorD::zeros_like(b);
  const TensorD dx = linear_backward(x, w, probe, dw, db);
  dx_store = dx;

  const auto f = [&]() { return probe_value(linear_forward(x, w, b), probe); };
  std::vector<ParamRef<double>> refs = {
      {"x", &x, &dx_store}, {"w", &w, &dw}, {"b", &b, &db}};
  const auto report = finite_difference_check<double>(f, refs, 1e-3);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("layer_norm forward definition") {
  Tensor gamma = Tensor::zeros(1, 8);
  gamma.fill(1.0f);
  Tensor beta = Tensor::zeros(1, 8);

  Tensor constant = Tensor::zeros(2, 8);
  constant.fill(3.25f);
  const Tensor y0 = layer_norm_forward(constant, gamma, beta, nullptr);
  for (float v : y0.values) CHECK(std::abs(v) < 1e-3);

  Rng rng(3);
  Tensor x = Tensor::randn(4, 8, 1.0, rng);
  const Tensor y = layer_norm_forward(x, gamma, beta, nullptr);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += y.at(i, j);
    mean /= 8.0;
    CHECK(std::abs(mean) < 1e-5);
    double var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    var /= 8.0;
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("layer_norm gradients match finite differences") {
  Rng rng(1);
  TensorD x = TensorD::randn(4, 8, 1.0, rng);
  TensorD gamma = TensorD::randn(1, 8, 0.5, rng);
  for (auto& v : gamma.values) v += 1.0;
  TensorD beta = TensorD::randn(1, 8, 0.5, rng);
  const TensorD probe = random_probe(4, 8, rng);

  LayerNormCache<double> cache;
  layer_norm_forward(x, gamma, beta, &cache);
  TensorD dgamma = TensorD::zeros_like(gamma);
  TensorD dbeta = TensorD::zeros_like(beta);
  TensorD dx = layer_norm_backward(cache, gamma, probe, dgamma, dbeta);

  const auto f = [&]() { return probe_value(layer_norm_forward(x, gamma, beta, nullptr), probe); };
  std::vector<ParamRef<double>> refs = {
      {"x", &x, &dx}, {"gamma", &gamma, &dgamma}, {"beta", &beta, &dbeta}};
  const auto report = finite_difference_check<double>(f, refs, 1e-3);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("softmax and relu basics") {
  Tensor x = Tensor::zeros(1, 3);
  const Tensor p = softmax_rows(x);
  for (float v : p.values) CHECK(v == doctest::Approx(1.0f / 3.0f));

  Rng rng(4);
  Tensor z = Tensor::randn(5, 7, 2.0, rng);
  Tensor shifted = z;
  for (auto& v : shifted.values) v += 11.5f;
  const Tensor pz = softmax_rows(z);
  const Tensor ps = softmax_rows(shifted);
  for (std::size_t i = 0; i < pz.values.size(); ++i) {
    CHECK(std::abs(pz.values[i] - ps.values[i]) < 1e-6);
  }
  for (std::size_t i = 0; i < pz.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < pz.cols(); ++j) {
      sum += pz.at(i, j);
      CHECK(pz.at(i, j) >= 0.0f);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }

  Tensor r = Tensor::zeros(1, 2);
  r.values = {-2.0f, 3.0f};
  CHECK(relu(r).values == std::vector<float>{0.0f, 3.0f});
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(6);
  TensorD x = TensorD::randn(3, 5, 1.0, rng);
  const TensorD probe = random_probe(3, 5, rng);
  const TensorD p = softmax_rows(x);
  TensorD dx = softmax_rows_backward(p, probe);
  const auto f = [&]() { return probe_value(softmax_rows(x), probe); };
  std::vector<ParamRef<double>> refs = {{"x", &x, &dx}};
  CHECK(finite_difference_check<double>(f, refs, 1e-3).max_rel_error < 1e-4);
}

TEST_CASE("attention over a single position is the identity distribution") {
  Rng rng(7);
  AttentionParamsT<float> p;
  p.wq = Tensor::randn(8, 8, 0.5, rng);
  p.wk = Tensor::randn(8, 8, 0.5, rng);
  p.wv = Tensor::randn(8, 8, 0.5, rng);
  p.wo = Tensor::randn(8, 8, 0.5, rng);
  Tensor x = Tensor::randn(1, 8, 1.0, rng);
  AttentionCache<float> cache;
  multi_head_attention_forward(x, p, 2, &cache);
  for (const auto& head : cache.probs) {
    CHECK(head.rows() == 1);
    CHECK(head.cols() == 1);
    CHECK(head.at(0, 0) == doctest::Approx(1.0f));
  }
}

TEST_CASE("attention rows sum to one") {
  Rng rng(8);
  AttentionParamsT<float> p;
  p.wq = Tensor::randn(8, 8, 0.5, rng);
  p.wk = Tensor::randn(8, 8, 0.5, rng);
  p.wv = Tensor::randn(8, 8, 0.5, rng);
  p.wo = Tensor::randn(8, 8, 0.5, rng);
  Tensor x = Tensor::randn(5, 8, 1.0, rng);
  AttentionCache<float> cache;
  multi_head_attention_forward(x, p, 2, &cache);
  for (const auto& head : cache.probs) {
    for (std::size_t i = 0; i < head.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < head.cols(); ++j) sum += head.at(i, j);
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
  CHECK_THROWS_AS(multi_head_attention_forward(x, p, 3, nullptr), NumericError);
}

TEST_CASE("attention gradients match finite differences") {
  Rng rng(9);
  AttentionParamsT<double> p;
  p.wq = TensorD::randn(8, 8, 0.5, rng);
  p.wk = TensorD::randn(8, 8, 0.5, rng);
  p.wv = TensorD::randn(8, 8, 0.5, rng);
  p.wo = TensorD::randn(8, 8, 0.5, rng);
  TensorD x = TensorD::randn(3, 8, 1.0, rng);
  const TensorD probe = random_probe(3, 8, rng);

  AttentionCache<double> cache;
  multi_head_attention_forward(x, p, 2, &cache);
  AttentionParamsT<double> grads;
  grads.wq = TensorD::zeros_like(p.wq);
  grads.wk = TensorD::zeros_like(p.wk);
  grads.wv = TensorD::zeros_like(p.wv);
  grads.wo = TensorD::zeros_like(p.wo);
  TensorD dx = multi_head_attention_backward(x, p, 2, cache, probe, grads);

  const auto f = [&]() {
    return probe_value(multi_head_attention_forward(x, p, 2, nullptr), probe);
  };
  std::vector<ParamRef<double>> refs = {{"x", &x, &dx},
                                        {"wq", &p.wq, &grads.wq},
                                        {"wk", &p.wk, &grads.wk},
                                        {"wv", &p.wv, &grads.wv},
                                        {"wo", &p.wo, &grads.wo}};
  CHECK(finite_difference_check<double>(f, refs, 1e-3).max_rel_error < 1e-4);
}

namespace {

template <typename T>
TransformerLayerParamsT<T> random_layer(std::size_t d, Rng& rng, double scale) {
  TransformerLayerParamsT<T> p;
  p.attn.wq = TensorT<T>::randn(d, d, scale, rng);
  p.attn.wk = TensorT<T>::randn(d, d, scale, rng);
  p.attn.wv = TensorT<T>::randn(d, d, scale, rng);
  p.attn.wo = TensorT<T>::randn(d, d, scale, rng);
  p.ln1_gamma = TensorT<T>::zeros(1, d);
  p.ln1_gamma.fill(T(1));
  p.ln1_beta = TensorT<T>::zeros(1, d);
  p.ffn_w1 = TensorT<T>::randn(d, 4 * d, scale, rng);
  p.ffn_b1 = TensorT<T>::zeros(1, 4 * d);
  p.ffn_w2 = TensorT<T>::randn(4 * d, d, scale, rng);
  p.ffn_b2 = TensorT<T>::zeros(1, d);
  p.ln2_gamma = TensorT<T>::zeros(1, d);
  p.ln2_gamma.fill(T(1));
  p.ln2_beta = TensorT<T>::zeros(1, d);
  return p;
}

template <typename T>
TransformerLayerParamsT<T> zero_layer_grads(const TransformerLayerParamsT<T>& p) {
  TransformerLayerParamsT<T> g;
  g.attn.wq = TensorT<T>::zeros_like(p.attn.wq);
  g.attn.wk = TensorT<T>::zeros_like(p.attn.wk);
  g.attn.wv = TensorT<T>::zeros_like(p.attn.wv);
  g.attn.wo = TensorT<T>::zeros_like(p.attn.wo);
  g.ln1_gamma = TensorT<T>::zeros_like(p.ln1_gamma);
  g.ln1_beta = TensorT<T>::zeros_like(p.ln1_beta);
  g.ffn_w1 = TensorT<T>::zeros_like(p.ffn_w1);
  g.ffn_b1 = TensorT<T>::zeros_like(p.ffn_b1);
  g.ffn_w2 = TensorT<T>::zeros_like(p.ffn_w2);
  g.ffn_b2 = TensorT<T>::zeros_like(p.ffn_b2);
  g.ln2_gamma = TensorT<T>::zeros_like(p.ln2_gamma);
  g.ln2_beta = TensorT<T>::zeros_like(p.ln2_beta);
  return g;
}

}  // namespace

TEST_CASE("transformer layer keeps shape and composes LN at zero weights") {
  Rng rng(10);
  auto p = random_layer<float>(8, rng, 0.3);
  Tensor x = Tensor::randn(4, 8, 1.0, rng);
  const Tensor y = transformer_layer_forward(x, p, 2, nullptr);
  CHECK(y.shape == x.shape);

  // Zero all weights: attention and FFN vanish, leaving LN(LN(X)).
  auto zero = random_layer<float>(8, rng, 0.0);
  const Tensor z = transformer_layer_forward(x, zero, 2, nullptr);
  const Tensor ln1 = layer_norm_forward(x, zero.ln1_gamma, zero.ln1_beta, nullptr);
  const Tensor ln2 = layer_norm_forward(ln1, zero.ln2_gamma, zero.ln2_beta, nullptr);
  for (std::size_t i = 0; i < z.values.size(); ++i) {
    CHECK(std::abs(z.values[i] - ln2.values[i]) < 1e-6);
  }
}

TEST_CASE("transformer layer end-to-end gradient check") {
  Rng rng(11);
  auto p = random_layer<double>(8, rng, 0.3);
  auto g = zero_layer_grads(p);
  TensorD x = TensorD::randn(3, 8, 1.0, rng);
  const TensorD probe = random_probe(3, 8, rng);

  TransformerLayerCache<double> cache;
  transformer_layer_forward(x, p, 2, &cache);
  TensorD dx = transformer_layer_backward(p, 2, cache, probe, g);

  const auto f = [&]() { return probe_value(transformer_layer_forward(x, p, 2, nullptr), probe); };
  std::vector<ParamRef<double>> refs = {
      {"x", &x, &dx},
      {"wq", &p.attn.wq, &g.attn.wq},
      {"wk", &p.attn.wk, &g.attn.wk},
      {"wv", &p.attn.wv, &g.attn.wv},
      {"wo", &p.attn.wo, &g.attn.wo},
      {"ln1g", &p.ln1_gamma, &g.ln1_gamma},
      {"ln1b", &p.ln1_beta, &g.ln1_beta},
      {"w1", &p.ffn_w1, &g.ffn_w1},
      {"b1", &p.ffn_b1, &g.ffn_b1},
      {"w2", &p.ffn_w2, &g.ffn_w2},
      {"b2", &p.ffn_b2, &g.ffn_b2},
      {"ln2g", &p.ln2_gamma, &g.ln2_gamma},
      {"ln2b", &p.ln2_beta, &g.ln2_beta},
  };
  CHECK(finite_difference_check<double>(f, refs, 1e-3).max_rel_error < 1e-4);
}

TEST_CASE("adamw hand-checked first step and fixed points") {
  Tensor p = Tensor::zeros(1, 1);
  p.values[0] = 1.0f;
  Tensor g = Tensor::zeros(1, 1);
  g.values[0] = 1.0f;
  ParamStore store({{"p", &p, &g}});
  AdamWOptions opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.0;
  adamw_step(store, opt);
  CHECK(std::abs(p.values[0] - 0.9f) < 1e-6);
  CHECK(store.step() == 1);

  // zero gradient, zero decay: exact fixed point
  Tensor q = Tensor::zeros(1, 3);
  q.values = {0.5f, -2.0f, 7.0f};
  Tensor qg = Tensor::zeros(1, 3);
  ParamStore store2({{"q", &q, &qg}});
  adamw_step(store2, opt);
  CHECK(q.values == std::vector<float>{0.5f, -2.0f, 7.0f});

  // zero gradient with decay: magnitudes strictly shrink
  opt.weight_decay = 0.01;
  adamw_step(store2, opt);
  CHECK(std::abs(q.values[0]) < 0.5f);
  CHECK(std::abs(q.values[1]) < 2.0f);
  CHECK(std::abs(q.values[2]) < 7.0f);
}

TEST_CASE("adamw is deterministic") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor p1 = Tensor::randn(3, 3, 1.0, rng);
    Tensor g1 = Tensor::randn(3, 3, 1.0, rng);
    Tensor p2 = p1;
    Tensor g2 = g1;
    ParamStore s1({{"p", &p1, &g1}});
    ParamStore s2({{"p", &p2, &g2}});
    AdamWOptions opt;
    adamw_step(s1, opt);
    adamw_step(s2, opt);
    CHECK(p1.values == p2.values);
  }
}

TEST_CASE("ops stay finite on large inputs") {
  Rng rng(13);
  Tensor x = Tensor::randn(4, 8, 1.0, rng);
  for (auto& v : x.values) v *= 1000.0f;
  CHECK(all_finite(softmax_rows(x)));
  Tensor gamma = Tensor::zeros(1, 8);
  gamma.fill(1.0f);
  Tensor beta = Tensor::zeros(1, 8);
  CHECK(all_finite(layer_norm_forward(x, gamma, beta, nullptr)));
  CHECK(all_finite(relu(x)));
  auto layer = random_layer<float>(8, rng, 0.3);
  CHECK(all_finite(transformer_layer_forward(x, layer, 2, nullptr)));
}
