// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "jdagg/corpus.hpp"

namespace jdagg {

// One scored query: candidates ordered by descending score, plus the ids
// that count as relevant. Ties are broken by candidate id before a run is
// built, so the order is total.
struct RankedRun {
  std::string query_id;
  std::vector<std::string> ranked;      // candidate ids, best first
  std::set<std::string> relevant;
  std::vector<double> scores;           // aligned with ranked; may be empty

  bool operator==(const RankedRun&) const = default;
};

// |relevant ∩ top-k| / |relevant|.
double recall_at_k(const RankedRun& run, std::size_t k);

// trec_eval convention: sum of precision@r over relevant hits at r <= k,
// divided by the total number of relevant items (not min(R, k)).
double average_precision_at_k(const RankedRun& run, std::size_t k = 25);

// Mean over runs of 1/rank of the first relevant candidate; 0 when a run
// retrieves none. No cutoff.
double mrr(const std::vector<RankedRun>& runs);

// Sorts candidate ids by (score desc, id asc) into a RankedRun.
RankedRun make_run(const std::string& query_id,
                   const std::vector<std::pair<std::string, double>>& scored,
                   std::set<std::string> relevant);

// TSV interchange: run rows are (query_id, candidate_id, score, rank),
// qrels rows are (query_id, candidate_id, 1).
struct ScoredRunRow {
  std::string query_id;
  std::string candidate_id;
  double score = 0.0;
  std::size_t rank = 0;
};
void write_run_file(const std::vector<ScoredRunRow>& rows, const std::string& path);
void write_qrels(const std::vector<RankedRun>& runs, const std::string& path);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// Mean and std across seeds, broken down per candidate pool.
struct MetricsReport {
  // pool name -> metric name -> stats. Pools: "thai", "english", "combined",
  // "overall" for the synonym task; "all" for normalization.
  std::map<std::string, std::map<std::string, MetricStats>> pools;
  std::map<std::string, std::size_t> pair_counts;  // (query, pool) pairs per pool
  std::size_t seeds = 0;
};

using TitleEmbedder = std::function<std::vector<float>(const std::string&)>;

// Per-seed raw values before aggregation, one map per seed.
using MetricValues = std::map<std::string, std::map<std::string, double>>;

// Synonym retrieval protocol: every variant queries the Thai and English
// candidate pools separately (candidates from its own set count as relevant,
// itself excluded); a (query, pool) pair with no relevant candidate in that
// pool is skipped. "overall" micro-averages across the surviving split-pool
// pairs; "combined" scores the union pool and is reported alongside.
// Titles pass through the title embedder only -- the aggregator is not
// involved in this protocol.
MetricValues synonym_retrieval_values(const TitleEmbedder& embed,
                                      const std::vector<SynonymSet>& sets,
                                      std::map<std::string, std::size_t>* pair_counts = nullptr,
                                      std::vector<RankedRun>* runs_out = nullptr);

MetricsReport evaluate_synonym_retrieval(const std::vector<TitleEmbedder>& per_seed_embedders,
                                         const std::vector<SynonymSet>& sets);

// Job-normalization protocol: the raw title queries the embeddings of every
// standardized label; gold labels (possibly several per raw title) are
// relevant. Reports R@5, R@10, MRR.
MetricValues normalization_values(const TitleEmbedder& embed,
                                  const std::vector<NormalizationPair>& pairs,
                                  const std::vector<std::string>& labels,
                                  std::size_t* query_count = nullptr);

MetricsReport evaluate_normalization(const std::vector<TitleEmbedder>& per_seed_embedders,
                                     const std::vector<NormalizationPair>& pairs,
                                     const std::vector<std::string>& labels);

// Title -> description retrieval over paired embedding rows (row i of titles
// matches row i of descriptions). Used for validation during grid search and
// for the overfit check.
struct TitleJdRetrieval {
  double r1 = 0.0;
  double map25 = 0.0;
  double mrr = 0.0;
};
TitleJdRetrieval evaluate_title_jd_retrieval(const std::vector<std::vector<float>>& titles,
                                             const std::vector<std::vector<float>>& descriptions);

struct ProbeConfig {
  std::size_t epochs = 200;
  double lr = 0.05;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
};

// Multi-label linear probe on frozen embeddings: one linear layer trained
// with sigmoid + binary cross-entropy via AdamW. Top-10 accuracy counts the
// fraction of (sample, gold-skill) pairs whose gold class lands in the
// sample's 10 highest scores. epochs = 0 scores the freshly initialized
// probe. Requires at least 10 classes.
double linear_probe(const std::vector<std::vector<float>>& embeddings,
                    const std::vector<std::vector<std::size_t>>& gold_classes,
                    std::size_t n_classes, const ProbeConfig& config);

}  // namespace jdagg
