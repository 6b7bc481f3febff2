// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "bat/corpus.hpp"
#include "bat/distill.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run batm(const bat::testing::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(BATM_EXE) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), {}};
  };
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Fixture {
  bat::testing::TempDir dir;
  std::string corpus;
  std::size_t train_docs = 0;
  Fixture() {
    const auto c = bat::testing::make_synthetic_corpus({.vocab = 40, .topics = 5, .train_docs = 30, .seed = 6});
    bat::save_corpus_dir(c, dir / "corpus");
    train_docs = c.split("train").size();
    corpus = (dir / "corpus").string();
  }
  std::string train_flags(const std::string& out, const std::string& extra = "") const {
    return "train --corpus-dir " + corpus + " --out-dir " + (dir / out).string() +
           " --k 5 --hidden 8 --epochs 5 --batch-size 8 --restarts 1 --lambda 0 " + extra;
  }
};

} // namespace

TEST_CASE("train writes a run directory") {
  Fixture f;
  const Run r = batm(f.dir, f.train_flags("out"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(f.dir / "out/run-1/checkpoint.batm"));
  CHECK(fs::exists(f.dir / "out/aggregate.json"));
  const auto resolved = json::parse(read(f.dir / "out/resolved_config.json"));
  CHECK(resolved.at("k") == 5);
  CHECK(resolved.at("epochs") == 5);
  std::ifstream metrics(f.dir / "out/run-1/metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = json::parse(line);
    CHECK(j.contains("epoch"));
    CHECK(j.contains("loss"));
    CHECK(j.contains("kl_weight"));
    CHECK(j.contains("dev_npmi"));
    ++lines;
  }
  CHECK(lines == 5);
  CHECK(json::parse(r.out).at("runs").size() == 1);
}

TEST_CASE("train is reproducible") {
  Fixture f;
  REQUIRE(batm(f.dir, f.train_flags("a")).code == 0);
  REQUIRE(batm(f.dir, f.train_flags("b")).code == 0);
  CHECK(read(f.dir / "a/run-1/metrics.jsonl") == read(f.dir / "b/run-1/metrics.jsonl"));
}

TEST_CASE("config file and flag precedence") {
  Fixture f;
  f.dir.write("cfg.json", R"({"k": 3, "epochs": 2, "hidden": 6, "batch_size": 10, "restarts": 1, "lambda": 0})");
  const Run r = batm(f.dir, "train --corpus-dir " + f.corpus + " --out-dir " + (f.dir / "o").string() +
                                " --config " + (f.dir / "cfg.json").string() + " --epochs 3");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto resolved = json::parse(read(f.dir / "o/resolved_config.json"));
  CHECK(resolved.at("k") == 3);
  CHECK(resolved.at("epochs") == 3);
}

TEST_CASE("configuration errors exit 2") {
  Fixture f;
  SUBCASE("distillation without a teacher") {
    const Run r = batm(f.dir, "train --corpus-dir " + f.corpus + " --out-dir " + (f.dir / "o").string() +
                                  " --epochs 1 --lambda 0.75");
    CHECK(r.code == 2);
    CHECK(r.err.find("--teacher-logits") != std::string::npos);
  }
  SUBCASE("bad flag value") {
    CHECK(batm(f.dir, f.train_flags("o", "--temp 0.5")).code == 2);
  }
  SUBCASE("unknown option") {
    CHECK(batm(f.dir, "train --bogus").code == 2);
  }
  SUBCASE("unknown config key") {
    f.dir.write("bad.json", R"({"topics": 3})");
    CHECK(batm(f.dir, f.train_flags("o", "--config " + (f.dir / "bad.json").string())).code == 2);
  }
}

TEST_CASE("distilled training through the surrogate teacher") {
  Fixture f;
  const std::string batl = (f.dir / "t.batl").string();
  Run r = batm(f.dir, "surrogate-teacher --corpus-dir " + f.corpus + " --smoothing 0.01 --out " + batl +
                          " --out-dir " + (f.dir / "s").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(f.dir / "s/resolved_config.json"));
  r = batm(f.dir, "check-teacher --corpus-dir " + f.corpus + " --teacher-logits " + batl + " --out-dir " +
                      (f.dir / "c").string());
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(json::parse(r.out).at("docs") == f.train_docs);
  r = batm(f.dir, "train --corpus-dir " + f.corpus + " --out-dir " + (f.dir / "kd").string() +
                      " --k 5 --hidden 8 --epochs 3 --batch-size 8 --restarts 1 --lambda 0.75 --temp 2 --teacher-logits " +
                      batl);
  REQUIRE_MESSAGE(r.code == 0, r.err);

  SUBCASE("teacher for the wrong vocabulary exits 3") {
    bat::distill::write_teacher_logits(f.dir / "w.batl", bat::distill::TeacherLogits(f.train_docs, 41, std::vector<float>(f.train_docs * 41, 0.f)));
    r = batm(f.dir, "check-teacher --corpus-dir " + f.corpus + " --teacher-logits " + (f.dir / "w.batl").string() +
                        " --out-dir " + (f.dir / "c").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("vocabulary size mismatch") != std::string::npos);
  }
}

TEST_CASE("eval, topics and align") {
  Fixture f;
  REQUIRE(batm(f.dir, f.train_flags("a")).code == 0);
  REQUIRE(batm(f.dir, f.train_flags("b", "--seed 2")).code == 0);
  const std::string ma = (f.dir / "a/run-1/checkpoint.batm").string();
  const std::string mb = (f.dir / "b/run-2/checkpoint.batm").string();
  const std::string od = " --out-dir " + (f.dir / "x").string();

  SUBCASE("eval report") {
    f.dir.write("ext.json", R"({"doc_count": 10, "df": {"w0": 4, "w1": 3, "zzz": 2}, "joint": [["w0", "w1", 2]]})");
    const Run r = batm(f.dir, "eval --model " + ma + " --corpus-dir " + f.corpus + " --external-counts " +
                                  (f.dir / "ext.json").string() + od);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = json::parse(r.out);
    CHECK(j.at("topics").size() == 5);
    CHECK(j.at("topics")[0].at("words").size() == 10);
    CHECK(j.contains("mean_npmi"));
    CHECK(j.contains("external_npmi"));
    CHECK(j.at("perplexity").get<double>() > 1.0);
    CHECK(j.contains("fails_redundancy_filter"));
    CHECK(r.err.find("not in the vocabulary") != std::string::npos);
    CHECK(fs::exists(f.dir / "x/resolved_config.json"));
  }
  SUBCASE("topics") {
    const Run r = batm(f.dir, "topics --model " + ma + " --corpus-dir " + f.corpus + " --top-words 4 --format json" + od);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(json::parse(r.out)[2].at("words").size() == 4);
  }
  SUBCASE("self-alignment is the identity") {
    const Run r = batm(f.dir, "align --model-a " + ma + " --model-b " + ma + " --corpus-dir " + f.corpus + od);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    for (const auto& p : json::parse(r.out).at("pairs")) {
      CHECK(p.at("a") == p.at("b"));
      CHECK(p.at("jsd").get<double>() == 0.0);
    }
  }
  SUBCASE("bracket sample and table") {
    const std::string table = (f.dir / "table.tsv").string();
    const Run r = batm(f.dir, "align --model-a " + ma + " --model-b " + mb + " --corpus-dir " + f.corpus +
                                  " --brackets 5 --per-bracket 1 --threshold 3 --table " + table + od);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto j = json::parse(r.out);
    CHECK(j.at("pairs").size() == 5);
    CHECK(j.at("bracket_sample").size() == 5);
    const auto& w = j.at("wins");
    CHECK(w.at("a").get<int>() + w.at("b").get<int>() + w.at("ties").get<int>() == 3);
    CHECK(read(table).find("A: (") != std::string::npos);
  }
  SUBCASE("damaged checkpoint exits 3") {
    const std::string bytes = read(ma);
    const auto bad = f.dir.write("bad.batm", bytes.substr(0, bytes.size() / 2));
    const Run r = batm(f.dir, "eval --model " + bad.string() + " --corpus-dir " + f.corpus + od);
    CHECK(r.code == 3);
    CHECK(r.err.find("byte offset") != std::string::npos);
  }
  SUBCASE("checkpoint for another vocabulary exits 3") {
    const auto other = bat::testing::make_synthetic_corpus({.vocab = 35, .topics = 5, .train_docs = 30, .seed = 6});
    bat::save_corpus_dir(other, f.dir / "other");
    const Run r = batm(f.dir, "eval --model " + ma + " --corpus-dir " + (f.dir / "other").string() + od);
    CHECK(r.code == 3);
  }
}
