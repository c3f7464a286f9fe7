// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "jdagg/error.hpp"
#include "jdagg/trainer.hpp"
#include "jdagg/version.hpp"

namespace jdagg {

namespace {

constexpr char kMagic[4] = {'J', 'D', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

using ordered_json = nlohmann::ordered_json;

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

ordered_json config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["dim"] = c.dim;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["lr"] = c.lr;
  j["tau"] = c.tau;
  j["batch_size"] = c.batch_size;
  j["warmup_fraction"] = c.warmup_fraction;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["weight_decay"] = c.weight_decay;
  j["max_segments"] = c.max_segments;
  j["encoder_buckets"] = c.encoder_buckets;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.tau = j.at("tau").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.warmup_fraction = j.at("warmup_fraction").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.max_segments = j.at("max_segments").get<std::size_t>();
  c.encoder_buckets = j.at("encoder_buckets").get<std::size_t>();
  return c;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  // param_refs wants mutable tensors; serialize from a local copy.
  AggregatorParams params_copy = model.params;
  AggregatorParams scratch = zero_grads_like(model.params);
  const auto refs = param_refs(params_copy, scratch);

  ordered_json manifest;
  manifest["format"] = kFormatVersion;
  manifest["tool_version"] = kVersion;
  manifest["step"] = model.final_step;
  manifest["config"] = config_to_json(model.config);
  manifest["encoder"] = {{"dim", model.encoder.dim},
                         {"buckets", model.encoder.buckets},
                         {"seed", model.encoder.seed}};
  manifest["aggregator"] = {{"dim", model.params.config.dim},
                            {"layers", model.params.config.layers},
                            {"heads", model.params.config.heads}};
  ordered_json params_json = ordered_json::array();
  for (const auto& ref : refs) {
    params_json.push_back({{"name", ref.name}, {"shape", ref.value->shape}});
  }
  manifest["params"] = std::move(params_json);
  const std::string manifest_text = manifest.dump();

  std::string payload;
  payload.append(kMagic, 4);
  put_u32_le(payload, kFormatVersion);
  put_u32_le(payload, static_cast<std::uint32_t>(manifest_text.size()));
  payload += manifest_text;
  for (const auto& ref : refs) {
    for (float v : ref.value->values) {
      if (!std::isfinite(v)) {
        throw NumericError("refusing to checkpoint non-finite parameter " + ref.name);
      }
      put_u32_le(payload, std::bit_cast<std::uint32_t>(v));
    }
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot open " + tmp + " for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw InputError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw InputError("cannot move " + tmp + " to " + path);
  }
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw InputError("bad magic in " + path);
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t format = get_u32_le(raw + 4);
  if (format != kFormatVersion) {
    throw CompatError("unsupported checkpoint format " + std::to_string(format));
  }
  const std::uint32_t manifest_len = get_u32_le(raw + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(manifest_len)) {
    throw InputError("truncated manifest in " + path);
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(12, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corrupt manifest in " + path + ": " + e.what());
  }

  TrainedModel model;
  try {
    model.config = config_from_json(manifest.at("config"));
    model.final_step = manifest.at("step").get<std::int64_t>();
    model.encoder.dim = manifest.at("encoder").at("dim").get<std::size_t>();
    model.encoder.buckets = manifest.at("encoder").at("buckets").get<std::size_t>();
    model.encoder.seed = manifest.at("encoder").at("seed").get<std::uint64_t>();
    AggregatorConfig agg_config;
    agg_config.dim = manifest.at("aggregator").at("dim").get<std::size_t>();
    agg_config.layers = manifest.at("aggregator").at("layers").get<std::size_t>();
    agg_config.heads = manifest.at("aggregator").at("heads").get<std::size_t>();
    Rng rng(0);
    model.params = init_aggregator<float>(agg_config, rng);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest missing fields in " + path + ": " + e.what());
  }

  AggregatorParams scratch = zero_grads_like(model.params);
  const auto refs = param_refs(model.params, scratch);
  const auto& params_json = manifest.at("params");
  if (params_json.size() != refs.size()) {
    throw CompatError("checkpoint parameter list does not match architecture");
  }

  std::size_t offset = 12 + manifest_len;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    const auto& entry = params_json.at(r);
    if (entry.at("name").get<std::string>() != refs[r].name) {
      throw CompatError("checkpoint parameter order mismatch at " + refs[r].name);
    }
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != refs[r].value->shape) {
      throw CompatError("checkpoint shape mismatch at " + refs[r].name);
    }
    for (auto& v : refs[r].value->values) {
      if (offset + 4 > bytes.size()) throw InputError("truncated payload in " + path);
      v = std::bit_cast<float>(get_u32_le(raw + offset));
      if (!std::isfinite(v)) throw NumericError("non-finite parameter in " + path);
      offset += 4;
    }
  }
  if (offset != bytes.size()) throw InputError("trailing bytes in " + path);
  return model;
}

}  // namespace jdagg
