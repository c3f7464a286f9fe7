// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jdagg/aggregator.hpp"
#include "jdagg/corpus.hpp"
#include "jdagg/encoder.hpp"

namespace jdagg {

struct TrainConfig {
  std::size_t dim = 64;
  std::size_t layers = 4;
  std::size_t heads = 2;
  double lr = 1e-5;
  double tau = 0.05;
  std::size_t batch_size = 16;
  double warmup_fraction = 0.1;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double weight_decay = 0.01;
  std::size_t max_segments = kDefaultMaxSegments;
  std::size_t encoder_buckets = 1u << 16;
};

void validate(const TrainConfig& config);

HashEncoderConfig encoder_config_for(const TrainConfig& config);

struct TrainedModel {
  AggregatorParams params;
  HashEncoderConfig encoder;
  TrainConfig config;
  std::int64_t final_step = 0;
};

struct StepRecord {
  std::int64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

using StepCallback = std::function<void(const StepRecord&)>;

// Linear ramp 0 -> base_lr over ceil(warmup_fraction * total) steps, then
// constant base_lr. Throws when step > total_steps.
double lr_at(std::size_t step, std::size_t total_steps, double base_lr,
             double warmup_fraction);

// One optimizer step per batch: titles are encoded once up front (the
// encoder is frozen), descriptions run through the aggregator, and the
// bidirectional loss backpropagates into the aggregator weights only.
// Epochs shuffle with the config seed; the trailing partial batch is
// dropped so every batch sees exactly batch_size in-batch negatives.
// The result is bit-for-bit reproducible from (corpus, config).
TrainedModel train(const std::vector<SegmentedPosting>& corpus, const TrainConfig& config,
                   const StepCallback& on_step = nullptr);

// Same loop over precomputed embeddings (titles[i] pairs with the segment
// matrix descriptions[i]), for corpora encoded offline by an external
// sentence encoder. Only the aggregator trains; the stored encoder config
// is a placeholder for the external source.
TrainedModel train_embedded(const std::vector<std::vector<float>>& titles,
                            const std::vector<EmbeddingMatrix>& descriptions,
                            const TrainConfig& config, const StepCallback& on_step = nullptr);

struct GridSpace {
  std::vector<double> lrs;
  std::vector<double> taus;
  std::vector<std::size_t> layer_counts;
};

enum class ValidationMetric { MAP25, MRR };

struct GridRunRecord {
  TrainConfig config;
  double metric = 0.0;
  bool failed = false;
  std::string message;
};

struct GridResult {
  TrainConfig best;
  double best_metric = 0.0;
  std::vector<GridRunRecord> runs;
};

// Exhaustive product in (lr, tau, layers) order over the base config.
std::vector<TrainConfig> enumerate_grid(const GridSpace& space, const TrainConfig& base);

// Trains each candidate on train_split and scores title->description
// retrieval on val_split with the requested metric. Ties break toward
// higher tau, then lower lr, then fewer layers, then enumeration order.
// Configs that fail to train are recorded as warnings and skipped.
GridResult grid_search(const GridSpace& space, const std::vector<SegmentedPosting>& train_split,
                       const std::vector<SegmentedPosting>& val_split, ValidationMetric metric,
                       const TrainConfig& base);

// Checkpoint file: "JDCK", u32 LE version, u32 LE manifest length, JSON
// manifest (names, shapes, hyperparameters, step), then one raw little-endian
// f32 blob per parameter in manifest order.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace jdagg
