// SPDX-License-Identifier: Apache-2.0
//
// jdagg command line: segment / synth / train / eval / probe / attn / grid.
// Reports go to stdout as JSON (human formatting behind --pretty),
// diagnostics go to stderr. Every output file gets a sibling
// <output>.manifest.json describing the resolved run, and files are
// written via temp-then-rename.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jdagg/aggregator.hpp"
#include "jdagg/corpus.hpp"
#include "jdagg/encoder.hpp"
#include "jdagg/error.hpp"
#include "jdagg/evalsuite.hpp"
#include "jdagg/trainer.hpp"
#include "jdagg/version.hpp"

namespace {

using jdagg::Error;
using jdagg::ErrorKind;
using ordered_json = nlohmann::ordered_json;

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw jdagg::InputError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw jdagg::InputError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw jdagg::InputError("cannot move " + tmp + " to " + path);
  }
}

void write_manifest(const std::string& command, const std::string& output_path,
                    const ordered_json& config, const std::vector<std::string>& inputs,
                    const std::vector<std::uint64_t>& seeds = {}) {
  ordered_json manifest;
  manifest["command"] = command;
  manifest["tool_version"] = jdagg::kVersion;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["output"] = output_path;
  manifest["seeds"] = seeds;
  write_file_atomic(output_path + ".manifest.json", manifest.dump(2) + "\n");
}

ordered_json train_config_json(const jdagg::TrainConfig& c) {
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

ordered_json report_json(const jdagg::MetricsReport& report) {
  ordered_json pools;
  for (const auto& [pool, metrics] : report.pools) {
    ordered_json entry;
    for (const auto& [name, stat] : metrics) {
      entry[name] = {{"mean", stat.mean}, {"std", stat.stddev}};
    }
    if (auto it = report.pair_counts.find(pool); it != report.pair_counts.end()) {
      entry["query_pool_pairs"] = it->second;
    }
    pools[pool] = entry;
  }
  ordered_json out;
  out["seeds"] = report.seeds;
  out["pools"] = pools;
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw jdagg::UsageError("--seeds: \"" + item + "\" is not an integer");
    }
  }
  if (seeds.empty()) throw jdagg::UsageError("--seeds lists no seeds");
  return seeds;
}

// Title embedders per seed: identical hashing encoder shape, reseeded. The
// aggregator never touches titles, so seed variance comes from the encoder.
std::vector<jdagg::TitleEmbedder> seed_embedders(const jdagg::HashEncoderConfig& base,
                                                 const std::vector<std::uint64_t>& seeds) {
  std::vector<jdagg::TitleEmbedder> embedders;
  for (std::uint64_t seed : seeds) {
    jdagg::HashEncoderConfig config = base;
    config.seed = seed;
    embedders.push_back([config](const std::string& text) {
      return jdagg::encode_sentence(text, config);
    });
  }
  return embedders;
}

int cmd_segment(const std::string& in_path, const std::string& out_path,
                std::size_t max_segments) {
  if (max_segments < 1) throw jdagg::UsageError("--max-segments must be >= 1");
  const auto postings = jdagg::load_postings(in_path);
  std::string body;
  for (const auto& posting : postings) {
    const auto segmented = jdagg::segment_posting(posting, max_segments);
    ordered_json obj;
    obj["id"] = segmented.id;
    obj["title"] = segmented.title;
    obj["segments"] = segmented.segments;
    obj["skills"] = segmented.skills;
    body += obj.dump() + "\n";
  }
  write_file_atomic(out_path, body);
  write_manifest("segment", out_path, {{"max_segments", max_segments}}, {in_path});
  std::cerr << "segmented " << postings.size() << " postings\n";
  return 0;
}

int cmd_synth(std::size_t n, std::uint64_t seed, const std::string& out_path) {
  const auto corpus = jdagg::generate_synthetic_corpus(n, seed);
  jdagg::save_postings(corpus, out_path);
  write_manifest("synth", out_path, {{"n", n}, {"seed", seed}}, {}, {seed});
  std::cerr << "wrote " << corpus.size() << " synthetic postings\n";
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& out_path,
              const std::string& log_path, const jdagg::TrainConfig& config) {
  jdagg::validate(config);  // usage errors (e.g. --tau 0) before any work
  const auto corpus = jdagg::load_segmented(corpus_path, config.max_segments);

  std::string log_body;
  const auto model = jdagg::train(corpus, config, [&](const jdagg::StepRecord& record) {
    ordered_json line;
    line["step"] = record.step;
    line["epoch"] = record.epoch;
    line["lr"] = record.lr;
    line["loss"] = record.loss;
    log_body += line.dump() + "\n";
  });
  jdagg::save_checkpoint(model, out_path);
  if (!log_path.empty()) write_file_atomic(log_path, log_body);
  write_manifest("train", out_path, train_config_json(config), {corpus_path}, {config.seed});

  ordered_json summary;
  summary["checkpoint"] = out_path;
  summary["steps"] = model.final_step;
  summary["postings"] = corpus.size();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& task, const std::string& seeds_text, std::size_t dim_override,
             const std::string& report_path, const std::string& runs_path, bool pretty) {
  const auto model = jdagg::load_checkpoint(ckpt_path);
  if (dim_override != 0 && dim_override != model.encoder.dim) {
    throw jdagg::CompatError("checkpoint dim " + std::to_string(model.encoder.dim) +
                             " does not match requested encoder dim " +
                             std::to_string(dim_override));
  }
  const auto seeds = parse_seed_list(seeds_text);
  const auto embedders = seed_embedders(model.encoder, seeds);

  jdagg::MetricsReport report;
  if (task == "synonym") {
    const auto sets = jdagg::load_synonyms(data_path);
    report = jdagg::evaluate_synonym_retrieval(embedders, sets);
    if (!runs_path.empty()) {
      std::vector<jdagg::RankedRun> runs;
      jdagg::synonym_retrieval_values(embedders.front(), sets, nullptr, &runs);
      std::vector<jdagg::ScoredRunRow> rows;
      for (const auto& run : runs) {
        for (std::size_t r = 0; r < run.ranked.size(); ++r) {
          const double score = r < run.scores.size() ? run.scores[r] : 0.0;
          rows.push_back({run.query_id, run.ranked[r], score, r + 1});
        }
      }
      jdagg::write_run_file(rows, runs_path);
      jdagg::write_qrels(runs, runs_path + ".qrels");
    }
  } else if (task == "normalize") {
    const auto pairs = jdagg::load_normalization_pairs(data_path);
    std::vector<std::string> labels;
    {
      std::set<std::string> seen;
      for (const auto& pair : pairs) {
        if (seen.insert(pair.standard_label).second) labels.push_back(pair.standard_label);
      }
    }
    report = jdagg::evaluate_normalization(embedders, pairs, labels);
  } else {
    throw jdagg::UsageError("--task must be synonym or normalize");
  }

  ordered_json out;
  out["task"] = task;
  out["checkpoint"] = ckpt_path;
  out["data"] = data_path;
  out["report"] = report_json(report);
  const std::string text = out.dump(2) + "\n";
  if (!report_path.empty()) {
    write_file_atomic(report_path, text);
    write_manifest("eval", report_path,
                   {{"task", task}, {"checkpoint", ckpt_path}, {"data", data_path}},
                   {ckpt_path, data_path}, seeds);
  }
  if (pretty) {
    for (const auto& [pool, metrics] : report.pools) {
      std::cout << pool << ":";
      for (const auto& [name, stat] : metrics) {
        std::printf("  %s %.4f (+/-%.4f)", name.c_str(), stat.mean, stat.stddev);
      }
      std::cout << "\n";
    }
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_probe(const std::string& ckpt_path, const std::string& labels_path,
              std::size_t epochs, double lr, std::uint64_t seed,
              const std::string& report_path) {
  const auto model = jdagg::load_checkpoint(ckpt_path);

  // TSV rows: title <TAB> skill. Rows sharing a title form one multi-label
  // sample; the class vocabulary is the sorted set of distinct skills.
  std::ifstream in(labels_path, std::ios::binary);
  if (!in) throw jdagg::InputError("cannot open " + labels_path);
  std::vector<std::string> titles;
  std::map<std::string, std::vector<std::string>> skills_per_title;
  std::set<std::string> vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw jdagg::InputError("line " + std::to_string(line_no) +
                              ": expected title<TAB>skill");
    }
    const std::string title = line.substr(0, tab);
    const std::string skill = line.substr(tab + 1);
    if (skills_per_title.find(title) == skills_per_title.end()) titles.push_back(title);
    skills_per_title[title].push_back(skill);
    vocab.insert(skill);
  }
  const std::vector<std::string> classes(vocab.begin(), vocab.end());
  std::map<std::string, std::size_t> class_index;
  for (std::size_t c = 0; c < classes.size(); ++c) class_index[classes[c]] = c;

  std::vector<std::vector<float>> embeddings;
  std::vector<std::vector<std::size_t>> gold;
  for (const auto& title : titles) {
    embeddings.push_back(jdagg::encode_sentence(title, model.encoder));
    std::vector<std::size_t> indices;
    for (const auto& skill : skills_per_title.at(title)) indices.push_back(class_index.at(skill));
    gold.push_back(std::move(indices));
  }

  jdagg::ProbeConfig config;
  config.epochs = epochs;
  config.lr = lr;
  config.seed = seed;
  const double accuracy = jdagg::linear_probe(embeddings, gold, classes.size(), config);

  ordered_json out;
  out["task"] = "probe";
  out["classes"] = classes.size();
  out["samples"] = titles.size();
  out["top10_accuracy"] = accuracy;
  const std::string text = out.dump(2) + "\n";
  if (!report_path.empty()) {
    write_file_atomic(report_path, text);
    write_manifest("probe", report_path, {{"epochs", epochs}, {"lr", lr}, {"seed", seed}},
                   {ckpt_path, labels_path}, {seed});
  }
  std::cout << text;
  return 0;
}

int cmd_attn(const std::string& ckpt_path, const std::string& posting_path, bool pretty,
             const std::string& report_path) {
  const auto model = jdagg::load_checkpoint(ckpt_path);

  std::ifstream in(posting_path, std::ios::binary);
  if (!in) throw jdagg::InputError("cannot open " + posting_path);
  nlohmann::json obj;
  try {
    in >> obj;
  } catch (const nlohmann::json::exception& e) {
    throw jdagg::InputError(std::string("invalid posting JSON: ") + e.what());
  }
  std::vector<std::string> segments;
  if (obj.contains("segments")) {
    segments = obj.at("segments").get<std::vector<std::string>>();
  } else if (obj.contains("description")) {
    segments = jdagg::segment_description(obj.at("description").get<std::string>(),
                                          model.config.max_segments);
  } else {
    throw jdagg::InputError("posting JSON needs \"segments\" or \"description\"");
  }

  const auto matrix = jdagg::encode_segments(segments, model.encoder);
  const auto scores = jdagg::attention_map(matrix, model.params);

  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    rows.push_back({{"segment_text", segments[i]}, {"score", scores[i]}});
  }
  ordered_json out;
  out["task"] = "attention";
  out["segments"] = rows;
  const std::string text = out.dump(2) + "\n";
  if (!report_path.empty()) {
    write_file_atomic(report_path, text);
    write_manifest("attn", report_path, {{"checkpoint", ckpt_path}},
                   {ckpt_path, posting_path});
  }
  if (pretty) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const int bar = static_cast<int>(scores[i] * 50.0f + 0.5f);
      std::printf("%6.3f |%-50s| %s\n", scores[i], std::string(bar, '#').c_str(),
                  segments[i].c_str());
    }
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_grid(const std::string& corpus_path, const std::string& space_path,
             const std::string& metric_name, double val_fraction,
             const jdagg::TrainConfig& base, const std::string& report_path) {
  const auto corpus = jdagg::load_segmented(corpus_path, base.max_segments);

  std::ifstream in(space_path, std::ios::binary);
  if (!in) throw jdagg::InputError("cannot open " + space_path);
  nlohmann::json space_json;
  try {
    in >> space_json;
  } catch (const nlohmann::json::exception& e) {
    throw jdagg::InputError(std::string("invalid space JSON: ") + e.what());
  }
  jdagg::GridSpace space;
  try {
    space.lrs = space_json.at("lr").get<std::vector<double>>();
    space.taus = space_json.at("tau").get<std::vector<double>>();
    space.layer_counts = space_json.at("layers").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw jdagg::InputError(std::string("space JSON needs lr/tau/layers arrays: ") + e.what());
  }

  // Deterministic head/tail split: the tail fraction validates.
  const auto val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(corpus.size()) * val_fraction));
  if (val_count >= corpus.size()) {
    throw jdagg::InputError("validation split leaves no training data");
  }
  const std::vector<jdagg::SegmentedPosting> train_split(corpus.begin(),
                                                         corpus.end() - val_count);
  const std::vector<jdagg::SegmentedPosting> val_split(corpus.end() - val_count, corpus.end());

  if (metric_name != "mrr" && metric_name != "map25") {
    throw jdagg::UsageError("--metric must be map25 or mrr");
  }
  const auto metric = metric_name == "mrr" ? jdagg::ValidationMetric::MRR
                                           : jdagg::ValidationMetric::MAP25;
  const auto result = jdagg::grid_search(space, train_split, val_split, metric, base);

  ordered_json runs = ordered_json::array();
  for (const auto& record : result.runs) {
    ordered_json entry;
    entry["config"] = train_config_json(record.config);
    if (record.failed) {
      entry["failed"] = true;
      entry["message"] = record.message;
    } else {
      entry["metric"] = record.metric;
    }
    runs.push_back(std::move(entry));
  }
  ordered_json out;
  out["task"] = "grid";
  out["metric"] = metric_name;
  out["runs"] = runs;
  out["best"] = train_config_json(result.best);
  out["best_metric"] = result.best_metric;
  const std::string text = out.dump(2) + "\n";
  if (!report_path.empty()) {
    write_file_atomic(report_path, text);
    write_manifest("grid", report_path, {{"metric", metric_name}, {"space", space_path}},
                   {corpus_path, space_path});
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Job-title representation learning from job descriptions"};
  app.set_version_flag("--version", jdagg::kVersion);
  app.require_subcommand(1);

  jdagg::TrainConfig base;

  // segment
  auto* segment = app.add_subcommand("segment", "Segment posting descriptions into JSONL");
  std::string seg_in, seg_out;
  std::size_t seg_max = jdagg::kDefaultMaxSegments;
  segment->add_option("input", seg_in, "postings JSONL")->required();
  segment->add_option("output", seg_out, "segmented JSONL")->required();
  segment->add_option("--max-segments", seg_max, "segment cap per posting");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic posting corpus");
  std::size_t synth_n = 32;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  synth->add_option("output", synth_out, "postings JSONL")->required();
  synth->add_option("--n", synth_n, "number of postings");
  synth->add_option("--seed", synth_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "Train the description aggregator");
  std::string train_in, train_out, train_log;
  train->add_option("corpus", train_in, "postings or segmented JSONL")->required();
  train->add_option("output", train_out, "checkpoint path")->required();
  train->add_option("--log", train_log, "training log JSONL (default <output>.log.jsonl)");
  train->add_option("--dim", base.dim, "embedding dim");
  train->add_option("--layers", base.layers, "aggregator transformer layers");
  train->add_option("--heads", base.heads, "attention heads");
  train->add_option("--lr", base.lr, "base learning rate");
  train->add_option("--tau", base.tau, "contrastive temperature");
  train->add_option("--batch", base.batch_size, "batch size");
  train->add_option("--warmup", base.warmup_fraction, "warmup fraction of total steps");
  train->add_option("--epochs", base.epochs, "training epochs");
  train->add_option("--seed", base.seed, "run seed");
  train->add_option("--weight-decay", base.weight_decay, "AdamW weight decay");
  train->add_option("--max-segments", base.max_segments, "segment cap per posting");
  train->add_option("--buckets", base.encoder_buckets, "hashing encoder buckets");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_task = "synonym", eval_seeds = "1";
  std::string eval_report, eval_runs;
  std::size_t eval_dim = 0;
  bool eval_pretty = false;
  eval->add_option("checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("data", eval_data, "synonyms.tsv or normalization.tsv")->required();
  eval->add_option("--task", eval_task, "synonym | normalize");
  eval->add_option("--seeds", eval_seeds, "comma-separated encoder seeds");
  eval->add_option("--dim", eval_dim, "expected encoder dim (compat check)");
  eval->add_option("--report", eval_report, "write the JSON report here");
  eval->add_option("--runs-out", eval_runs, "dump TSV run + qrels files");
  eval->add_flag("--pretty", eval_pretty, "human table instead of JSON");

  // probe
  auto* probe = app.add_subcommand("probe", "Linear probe of title embeddings");
  std::string probe_ckpt, probe_labels, probe_report;
  std::size_t probe_epochs = 200;
  double probe_lr = 0.05;
  std::uint64_t probe_seed = 1;
  probe->add_option("checkpoint", probe_ckpt, "checkpoint path")->required();
  probe->add_option("labels", probe_labels, "TSV title<TAB>skill rows")->required();
  probe->add_option("--epochs", probe_epochs, "probe training epochs");
  probe->add_option("--lr", probe_lr, "probe learning rate");
  probe->add_option("--seed", probe_seed, "probe init seed");
  probe->add_option("--report", probe_report, "write the JSON report here");

  // attn
  auto* attn = app.add_subcommand("attn", "Per-segment attention scores");
  std::string attn_ckpt, attn_posting, attn_report;
  bool attn_pretty = false;
  attn->add_option("checkpoint", attn_ckpt, "checkpoint path")->required();
  attn->add_option("posting", attn_posting, "single posting JSON")->required();
  attn->add_flag("--pretty", attn_pretty, "bar chart instead of JSON");
  attn->add_option("--report", attn_report, "write the JSON report here");

  // grid
  auto* grid = app.add_subcommand("grid", "Grid search over lr/tau/layers");
  std::string grid_corpus, grid_space, grid_metric = "map25", grid_report;
  double grid_val_fraction = 0.25;
  grid->add_option("corpus", grid_corpus, "postings or segmented JSONL")->required();
  grid->add_option("space", grid_space, "JSON with lr/tau/layers arrays")->required();
  grid->add_option("--metric", grid_metric, "map25 | mrr");
  grid->add_option("--val-fraction", grid_val_fraction, "held-out tail fraction");
  grid->add_option("--report", grid_report, "write the JSON report here");
  grid->add_option("--dim", base.dim, "embedding dim");
  grid->add_option("--heads", base.heads, "attention heads");
  grid->add_option("--batch", base.batch_size, "batch size");
  grid->add_option("--epochs", base.epochs, "training epochs");
  grid->add_option("--seed", base.seed, "run seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1
  }

  try {
    if (segment->parsed()) return cmd_segment(seg_in, seg_out, seg_max);
    if (synth->parsed()) return cmd_synth(synth_n, synth_seed, synth_out);
    if (train->parsed()) {
      const std::string log = train_log.empty() ? train_out + ".log.jsonl" : train_log;
      return cmd_train(train_in, train_out, log, base);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_data, eval_task, eval_seeds, eval_dim, eval_report,
                      eval_runs, eval_pretty);
    }
    if (probe->parsed()) {
      return cmd_probe(probe_ckpt, probe_labels, probe_epochs, probe_lr, probe_seed,
                       probe_report);
    }
    if (attn->parsed()) return cmd_attn(attn_ckpt, attn_posting, attn_pretty, attn_report);
    if (grid->parsed()) {
      return cmd_grid(grid_corpus, grid_space, grid_metric, grid_val_fraction, base,
                      grid_report);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
