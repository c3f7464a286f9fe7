// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers.
#pragma once

#include "jdagg/aggregator.hpp"
#include "jdagg/rng.hpp"

namespace test_helpers {

// Aggregator parameters at a generic random scale for gradient checking.
// The production 0.02 init keeps gradients too small for epsilon = 1e-3
// central differences; checks want O(1) curvature instead.
template <typename T>
jdagg::AggregatorParamsT<T> random_aggregator(const jdagg::AggregatorConfig& config,
                                              jdagg::Rng& rng) {
  auto params = jdagg::init_aggregator<T>(config, rng);
  auto grads = jdagg::zero_grads_like(params);
  for (auto& ref : jdagg::param_refs(params, grads)) {
    const bool is_gamma = ref.name.find("gamma") != std::string::npos;
    for (auto& v : ref.value->values) {
      v = static_cast<T>((is_gamma ? 1.0 : 0.0) + 0.3 * rng.next_normal());
    }
  }
  return params;
}

}  // namespace test_helpers
