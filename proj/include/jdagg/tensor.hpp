// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "jdagg/rng.hpp"

namespace jdagg {

// Dense row-major tensor. Production code instantiates T = float (32-bit
// storage, reductions accumulate in double); the gradient checker runs the
// same kernels at T = double.
template <typename T>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<T> values;

  TensorT() = default;
  TensorT(std::initializer_list<std::size_t> s, std::vector<T> v)
      : shape(s), values(std::move(v)) {}

  static TensorT zeros(std::size_t rows, std::size_t cols) {
    TensorT t;
    t.shape = {rows, cols};
    t.values.assign(rows * cols, T(0));
    return t;
  }

  static TensorT zeros_like(const TensorT& other) {
    TensorT t;
    t.shape = other.shape;
    t.values.assign(other.values.size(), T(0));
    return t;
  }

  static TensorT randn(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    TensorT t = zeros(rows, cols);
    for (auto& v : t.values) v = static_cast<T>(stddev * rng.next_normal());
    return t;
  }

  std::size_t numel() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  T& at(std::size_t i, std::size_t j) {
    assert(shape.size() == 2 && i < shape[0] && j < shape[1]);
    return values[i * shape[1] + j];
  }
  T at(std::size_t i, std::size_t j) const {
    assert(shape.size() == 2 && i < shape[0] && j < shape[1]);
    return values[i * shape[1] + j];
  }

  void fill(T v) { std::fill(values.begin(), values.end(), v); }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.values.reserve(values.size());
    for (T v : values) out.values.push_back(static_cast<U>(v));
    return out;
  }
};

using Tensor = TensorT<float>;

template <typename T>
bool all_finite(const TensorT<T>& t) {
  for (T v : t.values) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

// Debug-mode finiteness check at op boundaries.
#ifndef NDEBUG
#define JDAGG_DCHECK_FINITE(t) assert(::jdagg::all_finite(t))
#else
#define JDAGG_DCHECK_FINITE(t) ((void)0)
#endif

}  // namespace jdagg
