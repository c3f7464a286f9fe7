// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command line binary: exit codes, file outputs,
// manifests, and report shapes. The binary path comes in via JDAGG_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = JDAGG_CLI_PATH;

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "jdagg_cli_tests";
  fs::create_directories(dir);
  return dir;
}

CommandResult run_cli(const std::string& args) {
  const auto dir = work_dir();
  const auto out_path = dir / "stdout.txt";
  const auto err_path = dir / "stderr.txt";
  const std::string command =
      kCli + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// A fast training setup over a tiny synthetic corpus.
std::string quick_train_flags() {
  return "--dim 8 --layers 1 --heads 2 --batch 8 --epochs 2 --lr 1e-3 --seed 5";
}

}  // namespace

TEST_CASE("segment: valid input, line-numbered failures, idempotence") {
  const auto dir = work_dir();
  const auto in = dir / "postings.jsonl";
  write_text(in,
             R"({"id":"p1","title":"Analyst","description":"• a\n• b"})"
             "\n"
             R"({"id":"p2","title":"Dev","description":"1. x\n2. y"})"
             "\n");
  const auto out = dir / "segmented.jsonl";
  const auto result = run_cli("segment " + in.string() + " " + out.string());
  CHECK(result.exit_code == 0);

  std::ifstream check(out);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(check, line)) {
    ++lines;
    const auto obj = nlohmann::json::parse(line);
    CHECK(obj.at("segments").size() == 2);
  }
  CHECK(lines == 2);
  CHECK(fs::exists(out.string() + ".manifest.json"));

  // malformed third line: exit 2 and the message names the line
  const auto bad = dir / "bad.jsonl";
  write_text(bad,
             R"({"id":"p1","title":"a","description":"x"})"
             "\n"
             R"({"id":"p2","title":"b","description":"y"})"
             "\n"
             "oops\n");
  const auto failure = run_cli("segment " + bad.string() + " " + (dir / "no.jsonl").string());
  CHECK(failure.exit_code == 2);
  CHECK(failure.err.find("line 3") != std::string::npos);

  // segment output is accepted as pre-segmented training input downstream
  const auto resegmented = run_cli("segment " + in.string() + " " + out.string());
  CHECK(resegmented.exit_code == 0);
}

TEST_CASE("synth is deterministic") {
  const auto dir = work_dir();
  const auto a = dir / "synth_a.jsonl";
  const auto b = dir / "synth_b.jsonl";
  CHECK(run_cli("synth " + a.string() + " --n 8 --seed 3").exit_code == 0);
  CHECK(run_cli("synth " + b.string() + " --n 8 --seed 3").exit_code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("train: checkpoint, manifest, log, reproducibility, tau guard") {
  const auto dir = work_dir();
  const auto corpus = dir / "train_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);

  const auto ckpt1 = dir / "model1.ckpt";
  const auto r1 = run_cli("train " + corpus.string() + " " + ckpt1.string() + " " +
                          quick_train_flags());
  CHECK(r1.exit_code == 0);
  CHECK(fs::exists(ckpt1));
  CHECK(fs::exists(ckpt1.string() + ".manifest.json"));
  CHECK(fs::exists(ckpt1.string() + ".log.jsonl"));

  const auto ckpt2 = dir / "model2.ckpt";
  const auto r2 = run_cli("train " + corpus.string() + " " + ckpt2.string() + " " +
                          quick_train_flags());
  CHECK(r2.exit_code == 0);
  CHECK(slurp(ckpt1) == slurp(ckpt2));  // same flags + seed, same bytes

  const auto bad = run_cli("train " + corpus.string() + " " + (dir / "x.ckpt").string() +
                           " --tau 0 " + quick_train_flags());
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("tau must be positive") != std::string::npos);

  const auto missing = run_cli("train " + (dir / "nope.jsonl").string() + " " +
                               (dir / "x.ckpt").string());
  CHECK(missing.exit_code == 2);
}

TEST_CASE("eval: synonym task, std 0 with one seed, dim compat") {
  const auto dir = work_dir();
  const auto corpus = dir / "eval_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);
  const auto ckpt = dir / "eval_model.ckpt";
  REQUIRE(run_cli("train " + corpus.string() + " " + ckpt.string() + " " + quick_train_flags())
              .exit_code == 0);

  const auto synonyms = dir / "synonyms.tsv";
  write_text(synonyms,
             "c0\tdata analyst\tenglish\n"
             "c0\tนักข้อมูล\tthai\n"
             "c1\tdeveloper\tenglish\n"
             "c1\tโปรแกรม\tthai\n");

  const auto result = run_cli("eval " + ckpt.string() + " " + synonyms.string() +
                              " --task synonym --seeds 7");
  CHECK(result.exit_code == 0);
  const auto report = nlohmann::json::parse(result.out);
  CHECK(report.at("report").at("seeds") == 1);
  for (const auto& pool : {"thai", "english", "combined", "overall"}) {
    CHECK(report.at("report").at("pools").contains(pool));
    CHECK(report.at("report").at("pools").at(pool).at("r10").at("std") == 0.0);
  }

  const auto multi = run_cli("eval " + ckpt.string() + " " + synonyms.string() +
                             " --task synonym --seeds 1,2,3");
  CHECK(multi.exit_code == 0);
  CHECK(nlohmann::json::parse(multi.out).at("report").at("seeds") == 3);

  const auto mismatch = run_cli("eval " + ckpt.string() + " " + synonyms.string() +
                                " --task synonym --seeds 1 --dim 64");
  CHECK(mismatch.exit_code == 4);

  const auto bad_task = run_cli("eval " + ckpt.string() + " " + synonyms.string() +
                                " --task nonsense --seeds 1");
  CHECK(bad_task.exit_code == 1);
}

TEST_CASE("eval: normalization task") {
  const auto dir = work_dir();
  const auto corpus = dir / "norm_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);
  const auto ckpt = dir / "norm_model.ckpt";
  REQUIRE(run_cli("train " + corpus.string() + " " + ckpt.string() + " " + quick_train_flags())
              .exit_code == 0);

  const auto pairs = dir / "norm.tsv";
  write_text(pairs,
             "senior data analyst\tdata analyst\n"
             "java developer\tsoftware developer\n"
             "sales rep\tsales representative\n");
  const auto result =
      run_cli("eval " + ckpt.string() + " " + pairs.string() + " --task normalize --seeds 1");
  CHECK(result.exit_code == 0);
  const auto report = nlohmann::json::parse(result.out);
  CHECK(report.at("report").at("pools").at("all").contains("mrr"));
}

TEST_CASE("attn: single-segment posting gets score 1.0") {
  const auto dir = work_dir();
  const auto corpus = dir / "attn_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);
  const auto ckpt = dir / "attn_model.ckpt";
  REQUIRE(run_cli("train " + corpus.string() + " " + ckpt.string() + " " + quick_train_flags())
              .exit_code == 0);

  const auto posting = dir / "posting.json";
  write_text(posting, R"({"id":"p","title":"t","segments":["only one segment"]})");
  const auto result = run_cli("attn " + ckpt.string() + " " + posting.string());
  CHECK(result.exit_code == 0);
  const auto report = nlohmann::json::parse(result.out);
  REQUIRE(report.at("segments").size() == 1);
  CHECK(report.at("segments").at(0).at("score").get<double>() == doctest::Approx(1.0));

  const auto multi = dir / "posting3.json";
  write_text(multi, R"({"id":"p","title":"t","segments":["a b","c d","e f"]})");
  const auto r3 = run_cli("attn " + ckpt.string() + " " + multi.string());
  CHECK(r3.exit_code == 0);
  const auto report3 = nlohmann::json::parse(r3.out);
  double total = 0.0;
  for (const auto& row : report3.at("segments")) {
    total += row.at("score").get<double>();
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("probe runs on a tiny labels file") {
  const auto dir = work_dir();
  const auto corpus = dir / "probe_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);
  const auto ckpt = dir / "probe_model.ckpt";
  REQUIRE(run_cli("train " + corpus.string() + " " + ckpt.string() + " " + quick_train_flags())
              .exit_code == 0);

  std::string labels_text;
  for (int i = 0; i < 12; ++i) {
    labels_text += "title" + std::to_string(i) + "\tskill_" + std::to_string(i % 11) + "\n";
  }
  const auto labels = dir / "labels.tsv";
  write_text(labels, labels_text);
  const auto result = run_cli("probe " + ckpt.string() + " " + labels.string() +
                              " --epochs 5 --lr 0.05");
  CHECK(result.exit_code == 0);
  const auto report = nlohmann::json::parse(result.out);
  CHECK(report.at("classes") == 11);
  CHECK(report.at("samples") == 12);
  CHECK(report.at("top10_accuracy").get<double>() >= 0.0);
}

TEST_CASE("grid: singleton space names the best config") {
  const auto dir = work_dir();
  const auto corpus = dir / "grid_corpus.jsonl";
  REQUIRE(run_cli("synth " + corpus.string() + " --n 16 --seed 2").exit_code == 0);

  const auto space = dir / "space.json";
  write_text(space, R"({"lr":[1e-3],"tau":[0.05],"layers":[1]})");
  const auto result = run_cli("grid " + corpus.string() + " " + space.string() +
                              " --dim 8 --batch 4 --epochs 2 --seed 5");
  CHECK(result.exit_code == 0);
  const auto report = nlohmann::json::parse(result.out);
  CHECK(report.at("runs").size() == 1);
  CHECK(report.at("best").at("lr").get<double>() == 1e-3);
  CHECK(report.at("best").at("tau").get<double>() == 0.05);
}

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("not_a_command").exit_code == 1);
  CHECK(run_cli("train").exit_code == 1);  // missing required args
}
