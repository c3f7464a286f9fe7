// SPDX-License-Identifier: Apache-2.0
#include "jdagg/encoder.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "jdagg/error.hpp"
#include "jdagg/rng.hpp"

namespace jdagg {

void validate(const HashEncoderConfig& config) {
  if (config.dim < 2) throw UsageError("encoder dim must be >= 2");
  if (config.buckets < config.dim) throw UsageError("encoder buckets must be >= dim");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

// Bucket vectors are regenerated on demand; components are N(0, 1/d) so the
// expected norm is ~1 and vanishes with probability zero.
void add_bucket_vector(std::uint64_t bucket, const HashEncoderConfig& config,
                       std::vector<double>& acc) {
  Rng rng(mix_seed(config.seed, bucket));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
  for (std::size_t i = 0; i < config.dim; ++i) {
    acc[i] += scale * rng.next_normal();
  }
}

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v & 0xFF),
      static_cast<unsigned char>((v >> 8) & 0xFF),
      static_cast<unsigned char>((v >> 16) & 0xFF),
      static_cast<unsigned char>((v >> 24) & 0xFF),
  };
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

bool read_u32_le(std::ifstream& in, std::uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) |
      (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

}  // namespace

std::vector<float> encode_sentence(std::string_view text, const HashEncoderConfig& config) {
  validate(config);
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw InputError("empty sentence");

  std::vector<double> acc(config.dim, 0.0);
  for (const auto& token : tokens) {
    add_bucket_vector(fnv1a64(token) % config.buckets, config, acc);
  }
  std::vector<float> out(config.dim);
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (std::size_t i = 0; i < config.dim; ++i) {
    out[i] = static_cast<float>(acc[i] * inv_n);
  }
  return out;
}

EmbeddingMatrix encode_segments(const std::vector<std::string>& segments,
                                const HashEncoderConfig& config) {
  if (segments.empty()) throw InputError("no segments to encode");
  EmbeddingMatrix matrix;
  matrix.rows = segments.size();
  matrix.dim = config.dim;
  matrix.values.resize(matrix.rows * matrix.dim);
  for (std::size_t r = 0; r < segments.size(); ++r) {
    std::vector<float> row;
    try {
      row = encode_sentence(segments[r], config);
    } catch (const Error& e) {
      throw InputError("segment " + std::to_string(r) + ": " + e.what());
    }
    std::memcpy(matrix.values.data() + r * matrix.dim, row.data(), matrix.dim * sizeof(float));
  }
  return matrix;
}

void write_embeddings(const EmbeddingMatrix& matrix, const std::string& path) {
  for (float v : matrix.values) {
    if (!std::isfinite(v)) throw NumericError("refusing to write non-finite embedding value");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out.write("JDEM", 4);
  write_u32_le(out, static_cast<std::uint32_t>(matrix.rows));
  write_u32_le(out, static_cast<std::uint32_t>(matrix.dim));
  for (float v : matrix.values) {
    write_u32_le(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw InputError("failed writing " + path);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "JDEM", 4) != 0) {
    throw InputError("bad magic in " + path);
  }
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  if (!read_u32_le(in, rows) || !read_u32_le(in, dim)) {
    throw InputError("truncated header in " + path);
  }
  EmbeddingMatrix matrix;
  matrix.rows = rows;
  matrix.dim = dim;
  matrix.values.resize(static_cast<std::size_t>(rows) * dim);
  for (auto& v : matrix.values) {
    std::uint32_t bits = 0;
    if (!read_u32_le(in, bits)) throw InputError("truncated payload in " + path);
    v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + path);
  }
  return matrix;
}

void write_embedding_ids(const std::vector<std::string>& ids, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    nlohmann::ordered_json obj;
    obj["row"] = i;
    obj["id"] = ids[i];
    out << obj.dump() << "\n";
  }
}

std::vector<std::string> load_embedding_ids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      const std::size_t row = obj.at("row").get<std::size_t>();
      if (row != ids.size()) throw InputError("row indices out of order");
      ids.push_back(obj.at("id").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ids;
}

}  // namespace jdagg
