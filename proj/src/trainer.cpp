// SPDX-License-Identifier: Apache-2.0
#include "jdagg/trainer.hpp"

#include <cmath>
#include <numeric>

#include "jdagg/error.hpp"
#include "jdagg/evalsuite.hpp"
#include "jdagg/objective.hpp"
#include "jdagg/parallel.hpp"

namespace jdagg {

void validate(const TrainConfig& config) {
  if (config.lr <= 0.0) throw UsageError("lr must be positive");
  if (config.tau <= 0.0) throw UsageError("tau must be positive");
  if (config.warmup_fraction < 0.0 || config.warmup_fraction >= 1.0) {
    throw UsageError("warmup_fraction must lie in [0, 1)");
  }
  if (config.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (config.epochs < 1) throw UsageError("epochs must be >= 1");
  if (config.max_segments < 1) throw UsageError("max_segments must be >= 1");
  validate(AggregatorConfig{config.dim, config.layers, config.heads});
  validate(HashEncoderConfig{config.dim, config.encoder_buckets, config.seed});
}

HashEncoderConfig encoder_config_for(const TrainConfig& config) {
  return HashEncoderConfig{config.dim, config.encoder_buckets, config.seed};
}

double lr_at(std::size_t step, std::size_t total_steps, double base_lr,
             double warmup_fraction) {
  if (step > total_steps) throw UsageError("lr_at: step beyond total_steps");
  const auto warmup_steps = static_cast<std::size_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
  if (warmup_steps == 0 || step >= warmup_steps) return base_lr;
  return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

TrainedModel train(const std::vector<SegmentedPosting>& corpus, const TrainConfig& config,
                   const StepCallback& on_step) {
  validate(config);
  const HashEncoderConfig encoder = encoder_config_for(config);

  // The encoder is frozen, so titles and segment matrices are encoded once.
  std::vector<std::vector<float>> titles(corpus.size());
  std::vector<EmbeddingMatrix> segments(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    titles[i] = encode_sentence(corpus[i].title, encoder);
    segments[i] = encode_segments(corpus[i].segments, encoder);
  });
  return train_embedded(titles, segments, config, on_step);
}

TrainedModel train_embedded(const std::vector<std::vector<float>>& titles,
                            const std::vector<EmbeddingMatrix>& segments,
                            const TrainConfig& config, const StepCallback& on_step) {
  validate(config);
  if (titles.size() != segments.size()) {
    throw InputError("title/description embedding counts disagree");
  }
  if (titles.size() < config.batch_size) {
    throw InputError("corpus smaller than one batch (" + std::to_string(titles.size()) +
                     " postings, batch_size " + std::to_string(config.batch_size) + ")");
  }
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (titles[i].size() != config.dim || segments[i].dim != config.dim) {
      throw CompatError("embedding dim mismatch at posting " + std::to_string(i));
    }
    if (segments[i].rows == 0) {
      throw InputError("posting " + std::to_string(i) + " has no segments");
    }
  }

  Rng rng(config.seed);
  AggregatorParams params =
      init_aggregator<float>(AggregatorConfig{config.dim, config.layers, config.heads}, rng);
  AggregatorParams grads = zero_grads_like(params);
  nn::ParamStoreT<float> store(param_refs(params, grads));

  const std::size_t n = config.batch_size;
  const std::size_t batches_per_epoch = titles.size() / n;  // drop-last
  const std::size_t total_steps = config.epochs * batches_per_epoch;

  std::vector<std::size_t> order(titles.size());
  std::iota(order.begin(), order.end(), 0);

  nn::AdamWOptions adamw;
  adamw.weight_decay = config.weight_decay;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      Tensor h = Tensor::zeros(n, config.dim);
      Tensor f = Tensor::zeros(n, config.dim);
      std::vector<AggregateCache<float>> caches(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[b * n + k];
        for (std::size_t j = 0; j < config.dim; ++j) h.at(k, j) = titles[idx][j];
        const Tensor fk = aggregate_forward<float>(to_tensor(segments[idx]), params, &caches[k]);
        for (std::size_t j = 0; j < config.dim; ++j) f.at(k, j) = fk.at(0, j);
      }

      const Tensor s = cosine_matrix<float>(h, f);
      const LossValue loss = bidirectional_loss<float>(s, config.tau);
      if (!std::isfinite(loss.value)) {
        throw NumericError("non-finite loss at step " + std::to_string(step));
      }

      Tensor dh = Tensor::zeros(n, config.dim);  // encoder frozen; discarded
      Tensor df = Tensor::zeros(n, config.dim);
      cosine_matrix_backward<float>(h, f, s, loss.grad, dh, df);

      store.zero_grads();
      for (std::size_t k = 0; k < n; ++k) {
        Tensor dfk = Tensor::zeros(1, config.dim);
        for (std::size_t j = 0; j < config.dim; ++j) dfk.at(0, j) = df.at(k, j);
        aggregate_backward<float>(caches[k], params, dfk, grads);
      }

      adamw.lr = lr_at(step, total_steps, config.lr, config.warmup_fraction);
      adamw_step(store, adamw);
      if (on_step) on_step(StepRecord{static_cast<std::int64_t>(step), epoch, adamw.lr, loss.value});
      ++step;
    }
  }

  TrainedModel model;
  model.params = std::move(params);
  model.encoder = encoder_config_for(config);
  model.config = config;
  model.final_step = static_cast<std::int64_t>(step);
  return model;
}

std::vector<TrainConfig> enumerate_grid(const GridSpace& space, const TrainConfig& base) {
  if (space.lrs.empty() || space.taus.empty() || space.layer_counts.empty()) {
    throw UsageError("grid space must list at least one lr, tau, and layer count");
  }
  std::vector<TrainConfig> configs;
  for (double lr : space.lrs) {
    for (double tau : space.taus) {
      for (std::size_t layers : space.layer_counts) {
        TrainConfig c = base;
        c.lr = lr;
        c.tau = tau;
        c.layers = layers;
        configs.push_back(c);
      }
    }
  }
  return configs;
}

namespace {

double validation_metric(const TrainedModel& model,
                         const std::vector<SegmentedPosting>& val_split,
                         ValidationMetric metric) {
  std::vector<std::vector<float>> titles(val_split.size());
  std::vector<std::vector<float>> descriptions(val_split.size());
  parallel_for(val_split.size(), [&](std::size_t i) {
    titles[i] = encode_sentence(val_split[i].title, model.encoder);
    descriptions[i] =
        aggregate(encode_segments(val_split[i].segments, model.encoder), model.params);
  });
  const TitleJdRetrieval result = evaluate_title_jd_retrieval(titles, descriptions);
  return metric == ValidationMetric::MAP25 ? result.map25 : result.mrr;
}

// Tie order per the selection rule: higher tau, then lower lr, then fewer
// layers, then enumeration order (the incumbent wins).
bool beats(const GridRunRecord& challenger, const GridRunRecord& incumbent) {
  if (challenger.metric != incumbent.metric) return challenger.metric > incumbent.metric;
  if (challenger.config.tau != incumbent.config.tau) {
    return challenger.config.tau > incumbent.config.tau;
  }
  if (challenger.config.lr != incumbent.config.lr) {
    return challenger.config.lr < incumbent.config.lr;
  }
  return challenger.config.layers < incumbent.config.layers;
}

}  // namespace

GridResult grid_search(const GridSpace& space, const std::vector<SegmentedPosting>& train_split,
                       const std::vector<SegmentedPosting>& val_split, ValidationMetric metric,
                       const TrainConfig& base) {
  GridResult result;
  bool have_best = false;
  GridRunRecord best_record;
  for (const TrainConfig& config : enumerate_grid(space, base)) {
    GridRunRecord record;
    record.config = config;
    try {
      const TrainedModel model = train(train_split, config);
      record.metric = validation_metric(model, val_split, metric);
    } catch (const Error& e) {
      record.failed = true;
      record.message = e.what();
    }
    if (!record.failed && (!have_best || beats(record, best_record))) {
      best_record = record;
      have_best = true;
    }
    result.runs.push_back(std::move(record));
  }
  if (!have_best) throw NumericError("every grid configuration failed to train");
  result.best = best_record.config;
  result.best_metric = best_record.metric;
  return result;
}

}  // namespace jdagg
