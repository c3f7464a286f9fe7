// SPDX-License-Identifier: Apache-2.0
#include "jdagg/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "jdagg/error.hpp"
#include "jdagg/optim.hpp"
#include "jdagg/parallel.hpp"
#include "jdagg/rng.hpp"
#include "jdagg/tensor.hpp"

namespace jdagg {

double recall_at_k(const RankedRun& run, std::size_t k) {
  if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
  if (run.relevant.empty()) throw InputError("recall_at_k: empty relevance set");
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, run.ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (run.relevant.count(run.ranked[r]) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(run.relevant.size());
}

double average_precision_at_k(const RankedRun& run, std::size_t k) {
  if (k < 1) throw UsageError("average_precision_at_k: k must be >= 1");
  if (run.relevant.empty()) throw InputError("average_precision_at_k: empty relevance set");
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, run.ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (run.relevant.count(run.ranked[r]) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(run.relevant.size());
}

double mrr(const std::vector<RankedRun>& runs) {
  if (runs.empty()) throw InputError("mrr: no runs");
  double total = 0.0;
  for (const auto& run : runs) {
    for (std::size_t r = 0; r < run.ranked.size(); ++r) {
      if (run.relevant.count(run.ranked[r]) > 0) {
        total += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  return total / static_cast<double>(runs.size());
}

RankedRun make_run(const std::string& query_id,
                   const std::vector<std::pair<std::string, double>>& scored,
                   std::set<std::string> relevant) {
  std::vector<std::pair<std::string, double>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // deterministic tie-break by candidate id
  });
  RankedRun run;
  run.query_id = query_id;
  run.ranked.reserve(sorted.size());
  run.scores.reserve(sorted.size());
  for (const auto& [id, score] : sorted) {
    run.ranked.push_back(id);
    run.scores.push_back(score);
  }
  run.relevant = std::move(relevant);
  return run;
}

void write_run_file(const std::vector<ScoredRunRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  for (const auto& row : rows) {
    out << row.query_id << '\t' << row.candidate_id << '\t' << row.score << '\t' << row.rank
        << '\n';
  }
}

void write_qrels(const std::vector<RankedRun>& runs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  for (const auto& run : runs) {
    for (const auto& id : run.relevant) {
      out << run.query_id << '\t' << id << "\t1\n";
    }
  }
}

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine over zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Variant {
  std::string id;         // "<canonical>#<index>"
  std::string canonical;
  std::string text;
  Language language;
  std::vector<float> embedding;
};

MetricStats stats_over(const std::vector<double>& values) {
  MetricStats s;
  if (values.empty()) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  s.mean = mean;
  s.stddev = std::sqrt(var);
  return s;
}

MetricsReport aggregate_seed_values(const std::vector<MetricValues>& per_seed) {
  MetricsReport report;
  report.seeds = per_seed.size();
  for (const auto& values : per_seed) {
    for (const auto& [pool, metrics] : values) {
      for (const auto& [name, value] : metrics) {
        (void)report.pools[pool][name];
        (void)value;
      }
    }
  }
  for (auto& [pool, metrics] : report.pools) {
    for (auto& [name, stat] : metrics) {
      std::vector<double> values;
      for (const auto& seed_values : per_seed) {
        values.push_back(seed_values.at(pool).at(name));
      }
      stat = stats_over(values);
    }
  }
  return report;
}

}  // namespace

MetricValues synonym_retrieval_values(const TitleEmbedder& embed,
                                      const std::vector<SynonymSet>& sets,
                                      std::map<std::string, std::size_t>* pair_counts,
                                      std::vector<RankedRun>* runs_out) {
  if (sets.empty()) throw InputError("no synonym sets");
  std::vector<Variant> variants;
  for (const auto& set : sets) {
    if (set.variants.size() < 2) {
      throw InputError("synonym set \"" + set.canonical_id + "\" has fewer than 2 variants");
    }
    for (std::size_t v = 0; v < set.variants.size(); ++v) {
      Variant item;
      item.id = set.canonical_id + "#" + std::to_string(v);
      item.canonical = set.canonical_id;
      item.text = set.variants[v].text;
      item.language = set.variants[v].language;
      variants.push_back(std::move(item));
    }
  }
  parallel_for(variants.size(), [&](std::size_t i) {
    variants[i].embedding = embed(variants[i].text);
  });

  // The split pools hold only unambiguously-tagged candidates; the combined
  // pool is every candidate regardless of language.
  const auto in_pool = [](const Variant& v, const std::string& pool) {
    if (pool == "combined") return true;
    if (pool == "thai") return v.language == Language::Thai;
    return v.language == Language::English;
  };
  for (const std::string pool : {"thai", "english"}) {
    if (std::none_of(variants.begin(), variants.end(),
                     [&](const Variant& v) { return in_pool(v, pool); })) {
      throw InputError(pool + " candidate pool is empty");
    }
  }

  std::map<std::string, std::vector<RankedRun>> pool_runs;
  for (const std::string pool : {"thai", "english", "combined"}) {
    std::vector<RankedRun>& runs = pool_runs[pool];
    for (std::size_t q = 0; q < variants.size(); ++q) {
      std::vector<std::pair<std::string, double>> scored;
      std::set<std::string> relevant;
      for (std::size_t c = 0; c < variants.size(); ++c) {
        if (c == q || !in_pool(variants[c], pool)) continue;
        scored.emplace_back(variants[c].id, cosine(variants[q].embedding, variants[c].embedding));
        if (variants[c].canonical == variants[q].canonical) relevant.insert(variants[c].id);
      }
      if (relevant.empty()) continue;  // no relevant in this pool: skip the pair
      runs.push_back(make_run(variants[q].id, scored, std::move(relevant)));
    }
  }
  // Overall micro-averages across the surviving (query, pool) pairs of the
  // two split pools; it is never the mean of the two pool averages.
  std::vector<RankedRun> overall = pool_runs.at("thai");
  overall.insert(overall.end(), pool_runs.at("english").begin(), pool_runs.at("english").end());
  pool_runs["overall"] = std::move(overall);

  MetricValues values;
  if (pair_counts) pair_counts->clear();
  for (const auto& [pool, runs] : pool_runs) {
    if (pair_counts) (*pair_counts)[pool] = runs.size();
    double r5 = 0.0;
    double r10 = 0.0;
    double map25 = 0.0;
    for (const auto& run : runs) {
      r5 += recall_at_k(run, 5);
      r10 += recall_at_k(run, 10);
      map25 += average_precision_at_k(run, 25);
    }
    const double n = runs.empty() ? 1.0 : static_cast<double>(runs.size());
    values[pool]["r5"] = r5 / n;
    values[pool]["r10"] = r10 / n;
    values[pool]["map25"] = map25 / n;
    if (runs_out && pool == std::string("overall")) {
      runs_out->insert(runs_out->end(), runs.begin(), runs.end());
    }
  }
  return values;
}

MetricsReport evaluate_synonym_retrieval(const std::vector<TitleEmbedder>& per_seed_embedders,
                                         const std::vector<SynonymSet>& sets) {
  if (per_seed_embedders.empty()) throw UsageError("need at least one seed embedder");
  std::vector<MetricValues> per_seed;
  std::map<std::string, std::size_t> pair_counts;
  for (const auto& embed : per_seed_embedders) {
    per_seed.push_back(synonym_retrieval_values(embed, sets, &pair_counts));
  }
  MetricsReport report = aggregate_seed_values(per_seed);
  report.pair_counts = pair_counts;
  return report;
}

MetricValues normalization_values(const TitleEmbedder& embed,
                                  const std::vector<NormalizationPair>& pairs,
                                  const std::vector<std::string>& labels,
                                  std::size_t* query_count) {
  if (pairs.empty()) throw InputError("no normalization pairs");
  if (labels.empty()) throw InputError("empty label set");
  std::set<std::string> label_set(labels.begin(), labels.end());
  for (const auto& pair : pairs) {
    if (label_set.count(pair.standard_label) == 0) {
      throw InputError("gold label \"" + pair.standard_label + "\" missing from label set");
    }
  }

  // Group gold labels per raw title, preserving first-seen query order.
  std::vector<std::string> queries;
  std::map<std::string, std::set<std::string>> gold;
  for (const auto& pair : pairs) {
    if (gold.find(pair.raw_title) == gold.end()) queries.push_back(pair.raw_title);
    gold[pair.raw_title].insert(pair.standard_label);
  }

  std::vector<std::vector<float>> label_embeddings(labels.size());
  parallel_for(labels.size(), [&](std::size_t i) { label_embeddings[i] = embed(labels[i]); });

  std::vector<RankedRun> runs(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    const auto query_embedding = embed(queries[q]);
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
      scored.emplace_back(labels[c], cosine(query_embedding, label_embeddings[c]));
    }
    std::set<std::string> relevant(gold.at(queries[q]).begin(), gold.at(queries[q]).end());
    runs[q] = make_run(queries[q], scored, std::move(relevant));
  });

  double r5 = 0.0;
  double r10 = 0.0;
  for (const auto& run : runs) {
    r5 += recall_at_k(run, 5);
    r10 += recall_at_k(run, 10);
  }
  MetricValues values;
  values["all"]["r5"] = r5 / static_cast<double>(runs.size());
  values["all"]["r10"] = r10 / static_cast<double>(runs.size());
  values["all"]["mrr"] = mrr(runs);
  if (query_count) *query_count = runs.size();
  return values;
}

MetricsReport evaluate_normalization(const std::vector<TitleEmbedder>& per_seed_embedders,
                                     const std::vector<NormalizationPair>& pairs,
                                     const std::vector<std::string>& labels) {
  if (per_seed_embedders.empty()) throw UsageError("need at least one seed embedder");
  std::vector<MetricValues> per_seed;
  std::size_t query_count = 0;
  for (const auto& embed : per_seed_embedders) {
    per_seed.push_back(normalization_values(embed, pairs, labels, &query_count));
  }
  MetricsReport report = aggregate_seed_values(per_seed);
  report.pair_counts["all"] = query_count;
  return report;
}

TitleJdRetrieval evaluate_title_jd_retrieval(
    const std::vector<std::vector<float>>& titles,
    const std::vector<std::vector<float>>& descriptions) {
  if (titles.empty() || titles.size() != descriptions.size()) {
    throw InputError("title/description embedding counts disagree");
  }
  const std::size_t n = titles.size();
  TitleJdRetrieval out;
  std::vector<double> r1(n);
  std::vector<double> ap(n);
  std::vector<double> rr(n);
  parallel_for(n, [&](std::size_t i) {
    const double self = cosine(titles[i], descriptions[i]);
    // Rank of the matching description among all candidates; ties resolve
    // by candidate index, consistent with id-ordered tie-breaking.
    std::size_t rank = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double score = cosine(titles[i], descriptions[j]);
      if (score > self || (score == self && j < i)) ++rank;
    }
    r1[i] = rank == 1 ? 1.0 : 0.0;
    ap[i] = rank <= 25 ? 1.0 / static_cast<double>(rank) : 0.0;
    rr[i] = 1.0 / static_cast<double>(rank);
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.r1 += r1[i];
    out.map25 += ap[i];
    out.mrr += rr[i];
  }
  out.r1 /= static_cast<double>(n);
  out.map25 /= static_cast<double>(n);
  out.mrr /= static_cast<double>(n);
  return out;
}

double linear_probe(const std::vector<std::vector<float>>& embeddings,
                    const std::vector<std::vector<std::size_t>>& gold_classes,
                    std::size_t n_classes, const ProbeConfig& config) {
  if (n_classes < 10) throw UsageError("linear_probe needs at least 10 classes");
  if (embeddings.empty() || embeddings.size() != gold_classes.size()) {
    throw InputError("probe inputs disagree in length");
  }
  const std::size_t n = embeddings.size();
  const std::size_t d = embeddings.front().size();

  Rng rng(config.seed);
  Tensor w = Tensor::randn(d, n_classes, 0.02, rng);
  Tensor b = Tensor::zeros(1, n_classes);
  Tensor dw = Tensor::zeros_like(w);
  Tensor db = Tensor::zeros_like(b);
  std::vector<nn::ParamRef<float>> refs = {{"w", &w, &dw}, {"b", &b, &db}};
  nn::ParamStoreT<float> store(refs);
  nn::AdamWOptions adamw;
  adamw.lr = config.lr;
  adamw.weight_decay = config.weight_decay;

  const auto scores_for = [&](std::size_t i, std::vector<double>& out) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      double acc = static_cast<double>(b.values[c]);
      for (std::size_t j = 0; j < d; ++j) {
        acc += static_cast<double>(embeddings[i][j]) * static_cast<double>(w.at(j, c));
      }
      out[c] = acc;
    }
  };

  // Full-batch sigmoid + BCE; d(loss)/d(logit) = sigmoid(z) - y.
  std::vector<double> logits(n_classes);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    store.zero_grads();
    for (std::size_t i = 0; i < n; ++i) {
      scores_for(i, logits);
      std::vector<char> is_gold(n_classes, 0);
      for (std::size_t g : gold_classes[i]) is_gold[g] = 1;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double p = 1.0 / (1.0 + std::exp(-logits[c]));
        const double delta = (p - (is_gold[c] ? 1.0 : 0.0)) / static_cast<double>(n);
        db.values[c] += static_cast<float>(delta);
        for (std::size_t j = 0; j < d; ++j) {
          dw.at(j, c) += static_cast<float>(delta * static_cast<double>(embeddings[i][j]));
        }
      }
    }
    adamw_step(store, adamw);
  }

  // Top-10 accuracy over (sample, gold-skill) pairs; equal scores resolve by
  // class index.
  std::size_t pairs = 0;
  std::size_t hits = 0;
  std::vector<std::size_t> idx(n_classes);
  for (std::size_t i = 0; i < n; ++i) {
    scores_for(i, logits);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + 10, idx.end(),
                      [&](std::size_t a, std::size_t c) {
                        if (logits[a] != logits[c]) return logits[a] > logits[c];
                        return a < c;
                      });
    std::set<std::size_t> top(idx.begin(), idx.begin() + 10);
    for (std::size_t g : gold_classes[i]) {
      if (g >= n_classes) throw InputError("gold class index out of range");
      ++pairs;
      if (top.count(g) > 0) ++hits;
    }
  }
  if (pairs == 0) throw InputError("no (sample, gold-skill) pairs to score");
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

}  // namespace jdagg
