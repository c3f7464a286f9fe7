// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "jdagg/error.hpp"
#include "jdagg/tensor.hpp"

namespace jdagg {

// S[i][j] = cos(h_i, f_j), the similarity matrix feeding the contrastive
// loss. Entries live in [-1, 1].
using SimilarityMatrix = Tensor;

template <typename T>
struct LossValueT {
  double value = 0.0;
  TensorT<T> grad;  // dL/dS, same shape as S
};

using LossValue = LossValueT<float>;

namespace detail {

template <typename T>
std::vector<double> row_norms(const TensorT<T>& m, const char* label) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double v = static_cast<double>(m.at(i, j));
      acc += v * v;
    }
    norms[i] = std::sqrt(acc);
    if (norms[i] == 0.0) {
      throw NumericError(std::string(label) + " row " + std::to_string(i) + " has zero norm");
    }
  }
  return norms;
}

}  // namespace detail

// S[i][j] = <h_i, f_j> / (|h_i| |f_j|). Throws on zero-norm rows, naming
// the side and row.
template <typename T>
TensorT<T> cosine_matrix(const TensorT<T>& h, const TensorT<T>& f) {
  if (h.cols() != f.cols()) throw NumericError("cosine: dimension mismatch");
  const auto h_norms = detail::row_norms(h, "title");
  const auto f_norms = detail::row_norms(f, "description");
  TensorT<T> s = TensorT<T>::zeros(h.rows(), f.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < f.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < h.cols(); ++k) {
        dot += static_cast<double>(h.at(i, k)) * static_cast<double>(f.at(j, k));
      }
      s.at(i, j) = static_cast<T>(dot / (h_norms[i] * f_norms[j]));
    }
  }
  return s;
}

// Backward of the cosine matrix: accumulates dH and dF given dS.
// d cos(h,f)/df = h/(|h||f|) - cos(h,f) * f/|f|^2.
template <typename T>
void cosine_matrix_backward(const TensorT<T>& h, const TensorT<T>& f, const TensorT<T>& s,
                            const TensorT<T>& ds, TensorT<T>& dh, TensorT<T>& df) {
  const auto h_norms = detail::row_norms(h, "title");
  const auto f_norms = detail::row_norms(f, "description");
  const std::size_t d = h.cols();
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < f.rows(); ++j) {
      const double g = static_cast<double>(ds.at(i, j));
      if (g == 0.0) continue;
      const double sij = static_cast<double>(s.at(i, j));
      const double inv_hf = 1.0 / (h_norms[i] * f_norms[j]);
      const double inv_ff = 1.0 / (f_norms[j] * f_norms[j]);
      const double inv_hh = 1.0 / (h_norms[i] * h_norms[i]);
      for (std::size_t k = 0; k < d; ++k) {
        const double hv = static_cast<double>(h.at(i, k));
        const double fv = static_cast<double>(f.at(j, k));
        df.at(j, k) = static_cast<T>(static_cast<double>(df.at(j, k)) +
                                     g * (hv * inv_hf - sij * fv * inv_ff));
        dh.at(i, k) = static_cast<T>(static_cast<double>(dh.at(i, k)) +
                                     g * (fv * inv_hf - sij * hv * inv_hh));
      }
    }
  }
}

// Bidirectional in-batch contrastive loss over an N x N similarity matrix:
// each anchor i pays a row-wise and a column-wise cross-entropy against the
// diagonal, and the batch loss is the mean over anchors. Log-sum-exp uses
// max subtraction; the analytic dL/dS comes back alongside the value.
template <typename T>
LossValueT<T> bidirectional_loss(const TensorT<T>& s, double tau) {
  if (tau <= 0.0) throw UsageError("tau must be positive");
  if (s.rows() != s.cols()) throw NumericError("loss: similarity matrix must be square");
  const std::size_t n = s.rows();

  // Row and column softmax probabilities at temperature tau.
  std::vector<double> row_probs(n * n);
  std::vector<double> col_probs(n * n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    double col_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      row_max = std::max(row_max, static_cast<double>(s.at(i, j)) / tau);
      col_max = std::max(col_max, static_cast<double>(s.at(j, i)) / tau);
    }
    double row_denom = 0.0;
    double col_denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_denom += std::exp(static_cast<double>(s.at(i, j)) / tau - row_max);
      col_denom += std::exp(static_cast<double>(s.at(j, i)) / tau - col_max);
    }
    const double diag = static_cast<double>(s.at(i, i)) / tau;
    loss += (std::log(row_denom) - (diag - row_max)) +
            (std::log(col_denom) - (diag - col_max));
    for (std::size_t j = 0; j < n; ++j) {
      row_probs[i * n + j] =
          std::exp(static_cast<double>(s.at(i, j)) / tau - row_max) / row_denom;
      col_probs[i * n + j] =
          std::exp(static_cast<double>(s.at(j, i)) / tau - col_max) / col_denom;
    }
  }

  LossValueT<T> out;
  out.value = loss / static_cast<double>(n);
  out.grad = TensorT<T>::zeros(n, n);
  const double scale = 1.0 / (static_cast<double>(n) * tau);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double delta = a == b ? 1.0 : 0.0;
      // row term of anchor a contributes p_row(a,b); column term of anchor b
      // contributes p_col(b, a) where col_probs[b*n+j] is softmax over column b.
      const double g = (row_probs[a * n + b] - delta) + (col_probs[b * n + a] - delta);
      out.grad.at(a, b) = static_cast<T>(g * scale);
    }
  }
  return out;
}

}  // namespace jdagg
