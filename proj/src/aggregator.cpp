// SPDX-License-Identifier: Apache-2.0
#include "jdagg/aggregator.hpp"

#include <algorithm>
#include <cctype>

namespace jdagg {

void validate(const AggregatorConfig& config) {
  if (config.dim < 2) throw UsageError("aggregator dim must be >= 2");
  if (config.layers < 1) throw UsageError("aggregator needs at least one layer");
  if (config.heads < 1 || config.dim % config.heads != 0) {
    throw UsageError("aggregator dim must be divisible by heads");
  }
}

Tensor to_tensor(const EmbeddingMatrix& m) {
  Tensor t;
  t.shape = {m.rows, m.dim};
  t.values = m.values;
  return t;
}

UnifiedRepresentation aggregate(const EmbeddingMatrix& segments, const AggregatorParams& params) {
  const Tensor f = aggregate_forward<float>(to_tensor(segments), params, nullptr);
  return f.values;
}

std::vector<float> attention_map(const EmbeddingMatrix& segments,
                                 const AggregatorParams& params) {
  if (params.layers.empty()) throw UsageError("attention_map needs at least one layer");
  AggregateCache<float> cache;
  aggregate_forward<float>(to_tensor(segments), params, &cache);

  const auto& probs = cache.layers.front().attn.probs;  // first layer only
  const std::size_t positions = probs.front().cols();   // n + 1
  const std::size_t n = positions - 1;
  std::vector<double> averaged(positions, 0.0);
  for (const auto& head : probs) {
    for (std::size_t j = 0; j < positions; ++j) {
      averaged[j] += static_cast<double>(head.at(0, j));  // summary-token query row
    }
  }
  double total = 0.0;
  for (std::size_t j = 1; j < positions; ++j) total += averaged[j];  // drop self entry
  std::vector<float> scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    scores[j] = static_cast<float>(averaged[j + 1] / total);
  }
  return scores;
}

std::vector<float> mean_pool_aggregate(const EmbeddingMatrix& segments) {
  if (segments.rows == 0) throw InputError("mean pooling over empty matrix");
  std::vector<float> out(segments.dim);
  for (std::size_t j = 0; j < segments.dim; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < segments.rows; ++i) acc += segments.at(i, j);
    out[j] = static_cast<float>(acc / static_cast<double>(segments.rows));
  }
  return out;
}

std::vector<float> max_pool_aggregate(const EmbeddingMatrix& segments) {
  if (segments.rows == 0) throw InputError("max pooling over empty matrix");
  std::vector<float> out(segments.dim);
  for (std::size_t j = 0; j < segments.dim; ++j) {
    float best = segments.at(0, j);
    for (std::size_t i = 1; i < segments.rows; ++i) best = std::max(best, segments.at(i, j));
    out[j] = best;
  }
  return out;
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<float> document_level_encode(const std::string& description,
                                         const HashEncoderConfig& config) {
  const std::string text = trimmed(description);
  return encode_sentence(text.empty() ? "<empty>" : text, config);
}

std::vector<float> skill_concat_encode(const std::vector<std::string>& skills,
                                       const std::string& separator,
                                       const HashEncoderConfig& config) {
  if (skills.empty()) throw InputError("no skills");
  std::string joined;
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (i > 0) joined += " " + separator + " ";
    joined += skills[i];
  }
  return encode_sentence(joined, config);
}

std::vector<float> skill_mean_encode(const std::vector<std::string>& skills,
                                     const HashEncoderConfig& config) {
  if (skills.empty()) throw InputError("no skills");
  std::vector<double> acc(config.dim, 0.0);
  for (const auto& skill : skills) {
    const auto v = encode_sentence(skill, config);
    for (std::size_t j = 0; j < config.dim; ++j) acc[j] += v[j];
  }
  std::vector<float> out(config.dim);
  for (std::size_t j = 0; j < config.dim; ++j) {
    out[j] = static_cast<float>(acc[j] / static_cast<double>(skills.size()));
  }
  return out;
}

std::vector<float> skill_max_encode(const std::vector<std::string>& skills,
                                    const HashEncoderConfig& config) {
  if (skills.empty()) throw InputError("no skills");
  std::vector<float> out = encode_sentence(skills.front(), config);
  for (std::size_t s = 1; s < skills.size(); ++s) {
    const auto v = encode_sentence(skills[s], config);
    for (std::size_t j = 0; j < config.dim; ++j) out[j] = std::max(out[j], v[j]);
  }
  return out;
}

}  // namespace jdagg
