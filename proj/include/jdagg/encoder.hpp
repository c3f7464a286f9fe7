// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace jdagg {

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major, rows*dim

  float& at(std::size_t r, std::size_t c) { return values[r * dim + c]; }
  float at(std::size_t r, std::size_t c) const { return values[r * dim + c]; }
};

// Deterministic feature-hashing sentence encoder. Stands in for the frozen
// pretrained encoder: tokens hash to buckets, each bucket owns a fixed
// N(0, 1/d) vector, and a sentence embedding is the mean of its token
// vectors (mean pooling over tokens).
struct HashEncoderConfig {
  std::size_t dim = 64;
  std::size_t buckets = 1u << 16;
  std::uint64_t seed = 1;
};

void validate(const HashEncoderConfig& config);  // dim >= 2, buckets >= dim

// 64-bit FNV-1a of the UTF-8 bytes; stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes);

// Lowercased whitespace tokenization (ASCII lowering; other bytes untouched).
std::vector<std::string> tokenize(std::string_view text);

// Mean of the token bucket vectors. Throws InputError when the text has no
// tokens ("empty sentence").
std::vector<float> encode_sentence(std::string_view text, const HashEncoderConfig& config);

// Row i is encode_sentence(segments[i]); errors carry the segment index.
EmbeddingMatrix encode_segments(const std::vector<std::string>& segments,
                                const HashEncoderConfig& config);

// Binary embedding file: "JDEM", u32 LE rows, u32 LE dim, then rows*dim
// 32-bit LE IEEE-754 floats, row-major. Round-trip is bit exact.
void write_embeddings(const EmbeddingMatrix& matrix, const std::string& path);
EmbeddingMatrix load_embeddings(const std::string& path);

// Optional sidecar mapping row index -> sentence id, one JSON object per line.
void write_embedding_ids(const std::vector<std::string>& ids, const std::string& path);
std::vector<std::string> load_embedding_ids(const std::string& path);

}  // namespace jdagg
