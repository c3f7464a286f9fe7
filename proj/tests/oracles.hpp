// SPDX-License-Identifier: Apache-2.0
//
// Independent brute-force oracles used by the unit and acceptance suites.
// These deliberately re-derive every quantity from its definition and share
// no code with the implementation paths they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "jdagg/evalsuite.hpp"
#include "jdagg/rng.hpp"
#include "jdagg/tensor.hpp"

namespace oracles {

// Recall@k from the definition: scan the whole prefix for every position.
inline double recall_at_k(const jdagg::RankedRun& run, std::size_t k) {
  std::size_t found = 0;
  for (const auto& rel : run.relevant) {
    for (std::size_t r = 0; r < run.ranked.size() && r < k; ++r) {
      if (run.ranked[r] == rel) {
        ++found;
        break;
      }
    }
  }
  return static_cast<double>(found) / static_cast<double>(run.relevant.size());
}

// AP@k, trec_eval denominator: precision recomputed by recounting the prefix
// at every relevant hit.
inline double average_precision_at_k(const jdagg::RankedRun& run, std::size_t k) {
  double total = 0.0;
  for (std::size_t r = 0; r < run.ranked.size() && r < k; ++r) {
    if (run.relevant.count(run.ranked[r]) == 0) continue;
    std::size_t hits_upto = 0;
    for (std::size_t p = 0; p <= r; ++p) {
      if (run.relevant.count(run.ranked[p]) > 0) ++hits_upto;
    }
    total += static_cast<double>(hits_upto) / static_cast<double>(r + 1);
  }
  return total / static_cast<double>(run.relevant.size());
}

inline double reciprocal_rank(const jdagg::RankedRun& run) {
  for (std::size_t r = 0; r < run.ranked.size(); ++r) {
    if (run.relevant.count(run.ranked[r]) > 0) return 1.0 / static_cast<double>(r + 1);
  }
  return 0.0;
}

inline double mrr(const std::vector<jdagg::RankedRun>& runs) {
  double total = 0.0;
  for (const auto& run : runs) total += reciprocal_rank(run);
  return total / static_cast<double>(runs.size());
}

// Random run with pool <= max_pool candidates and 1..max_relevant relevant
// ids, some of which may sit outside the ranking (unretrieved).
inline jdagg::RankedRun random_run(jdagg::Rng& rng, std::size_t max_pool,
                                   std::size_t max_relevant) {
  const std::size_t pool = 1 + rng.next_below(max_pool);
  jdagg::RankedRun run;
  run.query_id = "q";
  for (std::size_t c = 0; c < pool; ++c) run.ranked.push_back("c" + std::to_string(c));
  rng.shuffle(run.ranked);
  const std::size_t n_rel =
      1 + rng.next_below(std::min<std::uint64_t>(max_relevant, pool));
  std::set<std::size_t> chosen;
  while (chosen.size() < n_rel) chosen.insert(rng.next_below(pool + 2));  // may be unretrieved
  for (std::size_t c : chosen) run.relevant.insert("c" + std::to_string(c));
  return run;
}

// Direct term-by-term evaluation of the bidirectional loss: plain exp sums
// in double, no max subtraction, mean over anchors.
template <typename T>
double bidirectional_loss(const jdagg::TensorT<T>& s, double tau) {
  const std::size_t n = s.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    double col_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += std::exp(static_cast<double>(s.at(i, j)) / tau);
      col_sum += std::exp(static_cast<double>(s.at(j, i)) / tau);
    }
    const double diag = std::exp(static_cast<double>(s.at(i, i)) / tau);
    total += -std::log(diag / row_sum) - std::log(diag / col_sum);
  }
  return total / static_cast<double>(n);
}

}  // namespace oracles
