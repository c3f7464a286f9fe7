// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jdagg/error.hpp"
#include "jdagg/tensor.hpp"

namespace jdagg::nn {

// Non-owning handle to one named parameter living inside a model struct.
template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value = nullptr;
  TensorT<T>* grad = nullptr;
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Binds a set of parameter refs to AdamW moment buffers and a shared step
// counter. The refs must outlive the store and keep stable addresses.
template <typename T>
class ParamStoreT {
 public:
  explicit ParamStoreT(std::vector<ParamRef<T>> refs) : refs_(std::move(refs)) {
    moments_m_.reserve(refs_.size());
    moments_v_.reserve(refs_.size());
    for (const auto& ref : refs_) {
      moments_m_.push_back(TensorT<T>::zeros_like(*ref.value));
      moments_v_.push_back(TensorT<T>::zeros_like(*ref.value));
    }
  }

  const std::vector<ParamRef<T>>& refs() const { return refs_; }
  std::int64_t step() const { return step_; }

  void zero_grads() {
    for (auto& ref : refs_) ref.grad->fill(T(0));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& ref : refs_) n += ref.value->numel();
    return n;
  }

  // lr may be 0 during warmup; moments still advance.
  friend void adamw_step(ParamStoreT<T>& store, const AdamWOptions& opt) {
    if (opt.lr < 0.0) throw UsageError("adamw: lr must be non-negative");
    store.step_ += 1;
    const double t = static_cast<double>(store.step_);
    const double bias1 = 1.0 - std::pow(opt.beta1, t);
    const double bias2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t r = 0; r < store.refs_.size(); ++r) {
      TensorT<T>& p = *store.refs_[r].value;
      const TensorT<T>& g = *store.refs_[r].grad;
      TensorT<T>& m = store.moments_m_[r];
      TensorT<T>& v = store.moments_v_[r];
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        double pv = static_cast<double>(p.values[i]);
        const double gv = static_cast<double>(g.values[i]);
        pv -= opt.lr * opt.weight_decay * pv;  // decoupled decay
        const double mv = opt.beta1 * static_cast<double>(m.values[i]) + (1.0 - opt.beta1) * gv;
        const double vv =
            opt.beta2 * static_cast<double>(v.values[i]) + (1.0 - opt.beta2) * gv * gv;
        m.values[i] = static_cast<T>(mv);
        v.values[i] = static_cast<T>(vv);
        const double m_hat = mv / bias1;
        const double v_hat = vv / bias2;
        pv -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
        p.values[i] = static_cast<T>(pv);
      }
    }
  }

 private:
  std::vector<ParamRef<T>> refs_;
  std::vector<TensorT<T>> moments_m_;
  std::vector<TensorT<T>> moments_v_;
  std::int64_t step_ = 0;
};

using ParamStore = ParamStoreT<float>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference check of the analytic gradients held in the ref'd grad
// tensors. f re-evaluates the scalar objective from the current parameter
// values; it is called with one coordinate nudged by +/- epsilon. Returns the
// max relative error |a - n| / max(|a|, |n|, 1e-8). Run on double params.
template <typename T>
GradCheckReport finite_difference_check(const std::function<double()>& f,
                                        const std::vector<ParamRef<T>>& params,
                                        double epsilon = 1e-3) {
  GradCheckReport report;
  for (const auto& ref : params) {
    for (std::size_t i = 0; i < ref.value->values.size(); ++i) {
      const T original = ref.value->values[i];
      ref.value->values[i] = static_cast<T>(static_cast<double>(original) + epsilon);
      const double f_plus = f();
      ref.value->values[i] = static_cast<T>(static_cast<double>(original) - epsilon);
      const double f_minus = f();
      ref.value->values[i] = original;
      const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
      const double analytic = static_cast<double>(ref.grad->values[i]);
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = ref.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace jdagg::nn
