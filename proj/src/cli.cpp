// SPDX-License-Identifier: Apache-2.0
#include "bat/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bat/align.hpp"
#include "bat/checkpoint.hpp"
#include "bat/distill.hpp"
#include "bat/error.hpp"
#include "bat/evalmetrics.hpp"
#include "bat/kernels.hpp"
#include "bat/trainer.hpp"

namespace bat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormats = R"(File formats:
  corpus dir      vocab.txt (one token per line, id = line index) and
                  train/dev/test.jsonl, one {"id": str, "bow": [[word_id, count], ...]} per line
  teacher logits  BATL v1: "BATL" u32 version=1, u64 D, u64 V, u8 dtype=1, D*V f32 LE row-major
  checkpoint      BATM v1: "BATM" u32 version=1, u32 records, records, u64 len + JSON hyperparameters
  external counts {"doc_count": N, "df": {"tok": n}, "joint": [["a", "b", n], ...]}
Exit codes: 0 ok, 1 internal error, 2 config error, 3 data error, 4 numerical abort)";

struct Common {
  std::string out_dir = ".";
};

void write_resolved(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  std::ofstream out(dir / "resolved_config.json", std::ios::binary | std::ios::trunc);
  out << cfg.dump(2) << '\n';
  std::clog << "resolved config: " << cfg.dump() << '\n';
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + out_path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> topic_tokens(const eval::TopicWordList& t, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (const auto& w : t.words) words.push_back(vocab.token(w.word));
  return words;
}

ntm::ModelParams load_model_for(const fs::path& path, const BowCorpus& corpus) {
  ntm::ModelParams p = load_checkpoint(path);
  if (p.hyper.vocab_size != corpus.vocab_size())
    throw DataError("checkpoint " + path.string() + " has V=" + std::to_string(p.hyper.vocab_size) +
                    " but the corpus has V=" + std::to_string(corpus.vocab_size()));
  return p;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config_path;
  std::string corpus_dir;
  std::string teacher_path;
  trainer::TrainConfig cfg;
};

void add_train(CLI::App& app, TrainArgs& a, Common& c, std::vector<std::pair<CLI::Option*, std::function<void()>>>& overrides,
               trainer::TrainConfig& flag_values) {
  app.add_option("--config", a.config_path, "JSON training config; flags override its keys");
  app.add_option("--corpus-dir", a.corpus_dir, "corpus directory")->required();
  app.add_option("--teacher-logits", a.teacher_path, "BATL teacher logits for the train split (required iff lambda > 0)");
  app.add_option("--out-dir", c.out_dir, "run output directory")->capture_default_str();
  auto& f = flag_values;
  auto reg = [&](CLI::Option* opt, std::function<void()> apply) { overrides.emplace_back(opt, std::move(apply)); };
  reg(app.add_option("--k", f.topics, "number of topics")->capture_default_str(), [&] { a.cfg.topics = f.topics; });
  reg(app.add_option("--hidden", f.hidden, "encoder hidden width")->capture_default_str(), [&] { a.cfg.hidden = f.hidden; });
  reg(app.add_option("--epochs", f.epochs, "training epochs")->capture_default_str(), [&] { a.cfg.epochs = f.epochs; });
  reg(app.add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str(), [&] { a.cfg.batch_size = f.batch_size; });
  reg(app.add_option("--lr", f.learning_rate, "Adam learning rate")->capture_default_str(), [&] { a.cfg.learning_rate = f.learning_rate; });
  reg(app.add_option("--alpha", f.alpha, "logistic-normal prior concentration")->capture_default_str(), [&] { a.cfg.alpha = f.alpha; });
  reg(app.add_option("--dropout", f.dropout, "hidden-layer dropout rate")->capture_default_str(), [&] { a.cfg.dropout = f.dropout; });
  reg(app.add_option("--anneal", f.anneal, "fraction of steps over which the KL weight ramps 0 -> 1")->capture_default_str(), [&] { a.cfg.anneal = f.anneal; });
  reg(app.add_option("--bg-smoothing", f.background_smoothing, "additive smoothing for background frequencies")->capture_default_str(), [&] { a.cfg.background_smoothing = f.background_smoothing; });
  reg(app.add_option("--lambda", f.kd.lambda, "teacher loss weight in [0, 1]")->capture_default_str(), [&] { a.cfg.kd.lambda = f.kd.lambda; });
  reg(app.add_option("--temp", f.kd.temperature, "distillation softmax temperature (>= 1)")->capture_default_str(), [&] { a.cfg.kd.temperature = f.kd.temperature; });
  reg(app.add_option("--clip", f.kd.clip, "keep the top clip*N_d teacher words; 0 disables")->capture_default_str(), [&] { a.cfg.kd.clip = f.kd.clip; });
  reg(app.add_option("--seed", f.seed, "base seed")->capture_default_str(), [&] { a.cfg.seed = f.seed; });
  reg(app.add_option("--restarts", f.restarts, "number of seeds (seed, seed+1, ...)")->capture_default_str(), [&] { a.cfg.restarts = f.restarts; });
  reg(app.add_flag("--parallel", f.parallel, "run restarts concurrently"), [&] { a.cfg.parallel = f.parallel; });
  reg(app.add_option("--top-words", f.top_words, "words per topic for NPMI")->capture_default_str(), [&] { a.cfg.top_words = f.top_words; });
  reg(app.add_option("--dev-split", f.dev_split, "split used for per-epoch NPMI")->capture_default_str(), [&] { a.cfg.dev_split = f.dev_split; });
}

int cmd_train(TrainArgs& a, const Common& c,
              const std::vector<std::pair<CLI::Option*, std::function<void()>>>& overrides) {
  if (!a.config_path.empty()) {
    std::ifstream in(a.config_path);
    if (!in) throw ConfigError("cannot open config file " + a.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("malformed config file " + a.config_path + ": " + e.what());
    }
    trainer::apply_json(j, a.cfg);
  }
  for (const auto& [opt, apply] : overrides)
    if (opt->count() > 0) apply();
  a.cfg.validate();
  if (a.cfg.kd.lambda > 0.0 && a.teacher_path.empty())
    throw ConfigError("--lambda " + std::to_string(a.cfg.kd.lambda) + " > 0 requires --teacher-logits");

  const BowCorpus corpus = load_corpus_dir(a.corpus_dir);
  std::optional<distill::TeacherLogits> teacher;
  if (a.cfg.kd.lambda > 0.0)
    teacher = distill::load_teacher_logits(a.teacher_path, corpus.split("train").size(), corpus.vocab_size());

  json resolved = trainer::to_json(a.cfg);
  resolved["command"] = "train";
  resolved["corpus_dir"] = a.corpus_dir;
  resolved["teacher_logits"] = a.teacher_path.empty() ? json(nullptr) : json(a.teacher_path);
  resolved["out_dir"] = c.out_dir;
  resolved["kernels"] = std::string(kernels::active().name);
  write_resolved(c.out_dir, resolved);

  const auto summary = trainer::run_restarts(corpus, teacher ? &*teacher : nullptr, a.cfg, fs::path(c.out_dir));
  json out{{"out_dir", c.out_dir}, {"runs", json::array()}};
  for (const auto& run : summary.runs) {
    const auto f = run.final_dev_npmi();
    out["runs"].push_back({{"seed", run.seed},
                           {"checkpoint", run.checkpoint.string()},
                           {"final_loss", run.epochs.back().loss},
                           {"final_dev_npmi", f ? json(*f) : json(nullptr)},
                           {"wall_seconds", run.wall_seconds}});
  }
  out["mean_dev_npmi"] = summary.final_dev_npmi.mean;
  out["sd_dev_npmi"] = summary.final_dev_npmi.sd;
  std::cout << out.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, corpus_dir, split = "test", external, out;
  std::size_t top_words = eval::kDefaultTopWords;
};

json topic_report(const ntm::ModelParams& p, const BowCorpus& corpus, const std::string& split,
                  std::size_t n, const std::string& external) {
  const auto topics = eval::top_words(p, n);
  const auto counts = eval::count_for_topics(doc_term_presence(corpus, split), topics);
  json report{{"split", split}, {"topics", json::array()}};
  std::optional<eval::CooccurrenceCounts> ext;
  if (!external.empty()) ext = eval::external_counts_load(external, corpus.vocabulary());
  for (const auto& t : topics) {
    json entry{{"id", t.topic}, {"words", topic_tokens(t, corpus.vocabulary())}, {"npmi", eval::npmi_topic(t, counts)}};
    if (ext) entry["external_npmi"] = eval::npmi_topic(t, *ext);
    report["topics"].push_back(std::move(entry));
  }
  report["mean_npmi"] = eval::npmi_model(topics, counts);
  if (ext) report["external_npmi"] = eval::npmi_model(topics, *ext);
  if (n == eval::kDefaultTopWords) {
    const std::size_t r = eval::redundancy_pairs(topics);
    report["redundant_pairs"] = r;
    report["fails_redundancy_filter"] = eval::fails_redundancy_filter(r);
  } else {
    report["redundant_pairs"] = nullptr;
  }
  report["perplexity"] = eval::perplexity(corpus.split(split), p, ntm::prior_from_alpha(p.hyper.alpha, p.hyper.topics));
  return report;
}

int cmd_eval(const EvalArgs& a, const Common& c) {
  write_resolved(c.out_dir, json{{"command", "eval"}, {"model", a.model}, {"corpus_dir", a.corpus_dir},
                                 {"split", a.split}, {"external_counts", a.external.empty() ? json(nullptr) : json(a.external)},
                                 {"top_words", a.top_words}, {"out", a.out}});
  const BowCorpus corpus = load_corpus_dir(a.corpus_dir);
  const ntm::ModelParams p = load_model_for(a.model, corpus);
  emit(topic_report(p, corpus, a.split, a.top_words, a.external), a.out);
  return kOk;
}

// ---------------------------------------------------------------- topics

struct TopicsArgs {
  std::string model, corpus_dir, format = "text";
  std::size_t top_words = eval::kDefaultTopWords;
};

int cmd_topics(const TopicsArgs& a, const Common& c) {
  write_resolved(c.out_dir, json{{"command", "topics"}, {"model", a.model}, {"corpus_dir", a.corpus_dir},
                                 {"top_words", a.top_words}, {"format", a.format}});
  const Vocabulary vocab = Vocabulary::load(fs::path(a.corpus_dir) / "vocab.txt");
  const ntm::ModelParams p = load_checkpoint(a.model);
  if (p.hyper.vocab_size != vocab.size()) throw DataError("checkpoint V does not match vocabulary size");
  const auto topics = eval::top_words(p, a.top_words);
  if (a.format == "json") {
    json out = json::array();
    for (const auto& t : topics) out.push_back({{"id", t.topic}, {"words", topic_tokens(t, vocab)}});
    std::cout << out.dump(2) << '\n';
  } else {
    for (const auto& t : topics) {
      std::cout << std::setw(4) << t.topic << ':';
      for (const auto& w : topic_tokens(t, vocab)) std::cout << ' ' << w;
      std::cout << '\n';
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  std::string model_a, model_b, corpus_dir, split = "dev", out, table;
  std::optional<std::size_t> threshold;
  std::size_t brackets = 0, per_bracket = 3;
  std::uint64_t seed = 7;
};

std::string pair_cell(std::size_t topic, double npmi, const std::vector<eval::TopicWordList>& topics,
                      const Vocabulary& vocab) {
  std::ostringstream s;
  s << '(' << std::fixed << std::setprecision(4) << npmi << ", '";
  const auto words = topic_tokens(topics[topic], vocab);
  for (std::size_t i = 0; i < words.size(); ++i) s << (i ? " " : "") << words[i];
  s << "')";
  return s.str();
}

int cmd_align(const AlignArgs& a, const Common& c) {
  write_resolved(c.out_dir, json{{"command", "align"}, {"model_a", a.model_a}, {"model_b", a.model_b},
                                 {"corpus_dir", a.corpus_dir}, {"split", a.split},
                                 {"threshold", a.threshold ? json(*a.threshold) : json(nullptr)},
                                 {"brackets", a.brackets}, {"per_bracket", a.per_bracket}, {"seed", a.seed}});
  const BowCorpus corpus = load_corpus_dir(a.corpus_dir);
  const ntm::ModelParams pa = load_model_for(a.model_a, corpus);
  const ntm::ModelParams pb = load_model_for(a.model_b, corpus);

  const auto presence = doc_term_presence(corpus, a.split);
  const auto top_a = eval::top_words(pa, std::min(eval::kDefaultTopWords, corpus.vocab_size()));
  const auto top_b = eval::top_words(pb, std::min(eval::kDefaultTopWords, corpus.vocab_size()));
  std::vector<eval::TopicWordList> both(top_a);
  both.insert(both.end(), top_b.begin(), top_b.end());
  const auto counts = eval::count_for_topics(presence, both);
  std::vector<double> npmi_a, npmi_b;
  for (const auto& t : top_a) npmi_a.push_back(eval::npmi_topic(t, counts));
  for (const auto& t : top_b) npmi_b.push_back(eval::npmi_topic(t, counts));

  auto pairs = align::competitive_link(align::jsd_matrix(align::topic_distributions(pa), align::topic_distributions(pb)));
  align::attach_npmi(pairs, npmi_a, npmi_b);
  const std::size_t threshold = a.threshold.value_or(pairs.size());
  const auto h2h = align::head_to_head(pairs, threshold);

  json report{{"pairs", json::array()}, {"threshold", threshold},
              {"wins", {{"a", h2h.wins_a}, {"b", h2h.wins_b}, {"ties", h2h.ties}}}};
  for (const auto& p : pairs)
    report["pairs"].push_back({{"a", p.topic_a}, {"b", p.topic_b}, {"jsd", p.jsd}, {"npmi_a", p.npmi_a}, {"npmi_b", p.npmi_b}});

  if (a.brackets > 0) {
    SeededRng rng(a.seed);
    const auto picks = align::bracket_sample(pairs, a.brackets, a.per_bracket, rng);
    json sample = json::array();
    std::ostringstream table;
    table << "bracket\tpair\tjsd\n";
    for (const auto& pick : picks) {
      const auto& p = pick.pair;
      sample.push_back({{"bracket", pick.bracket}, {"a", p.topic_a}, {"b", p.topic_b}, {"jsd", p.jsd},
                        {"npmi_a", p.npmi_a}, {"npmi_b", p.npmi_b}});
      table << pick.bracket + 1 << "\tA: " << pair_cell(p.topic_a, p.npmi_a, top_a, corpus.vocabulary())
            << "\n\tB: " << pair_cell(p.topic_b, p.npmi_b, top_b, corpus.vocabulary()) << '\t' << std::fixed
            << std::setprecision(4) << p.jsd << '\n';
    }
    report["bracket_sample"] = std::move(sample);
    if (!a.table.empty()) {
      std::ofstream out(a.table, std::ios::binary | std::ios::trunc);
      out << table.str();
    }
  }
  emit(report, a.out);
  return kOk;
}

// ---------------------------------------------------------------- teacher files

struct SurrogateArgs {
  std::string corpus_dir, split = "train", out;
  double smoothing = 0.01, floor = 1e-10, bg_smoothing = 0.0;
};

int cmd_surrogate(const SurrogateArgs& a, const Common& c) {
  write_resolved(c.out_dir, json{{"command", "surrogate-teacher"}, {"corpus_dir", a.corpus_dir}, {"split", a.split},
                                 {"smoothing", a.smoothing}, {"floor", a.floor}, {"bg_smoothing", a.bg_smoothing},
                                 {"out", a.out}});
  const BowCorpus corpus = load_corpus_dir(a.corpus_dir);
  const auto logits = distill::surrogate_teacher(corpus, a.split, a.smoothing, a.floor, a.bg_smoothing);
  distill::write_teacher_logits(a.out, logits);
  std::cout << json{{"out", a.out}, {"docs", logits.docs()}, {"vocab", logits.vocab_size()}}.dump() << '\n';
  return kOk;
}

struct CheckArgs {
  std::string corpus_dir, split = "train", teacher;
};

int cmd_check(const CheckArgs& a, const Common& c) {
  write_resolved(c.out_dir, json{{"command", "check-teacher"}, {"corpus_dir", a.corpus_dir}, {"split", a.split},
                                 {"teacher_logits", a.teacher}});
  const BowCorpus corpus = load_corpus_dir(a.corpus_dir);
  const auto logits = distill::load_teacher_logits(a.teacher, corpus.split(a.split).size(), corpus.vocab_size());
  double lo = INFINITY, hi = -INFINITY;
  for (float v : logits.data()) {
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  std::cout << json{{"ok", true}, {"docs", logits.docs()}, {"vocab", logits.vocab_size()}, {"min", lo}, {"max", hi}}.dump()
            << '\n';
  return kOk;
}

} // namespace

int run(int argc, char** argv) {
  CLI::App app{"Topic models with knowledge distillation from a document-autoencoder teacher"};
  app.footer(kFormats);
  app.require_subcommand(1);
  Common common;

  TrainArgs train_args;
  trainer::TrainConfig flag_values;
  std::vector<std::pair<CLI::Option*, std::function<void()>>> overrides;
  auto* train = app.add_subcommand("train", "train one or more seeded topic models");
  add_train(*train, train_args, common, overrides, flag_values);

  EvalArgs eval_args;
  auto* evalc = app.add_subcommand("eval", "topic report: NPMI, redundancy and perplexity");
  evalc->add_option("--model", eval_args.model, "BATM checkpoint")->required();
  evalc->add_option("--corpus-dir", eval_args.corpus_dir, "corpus directory")->required();
  evalc->add_option("--split", eval_args.split, "reference split for NPMI and perplexity")->capture_default_str();
  evalc->add_option("--external-counts", eval_args.external, "external reference counts JSON");
  evalc->add_option("--top-words", eval_args.top_words, "words per topic")->capture_default_str();
  evalc->add_option("--out", eval_args.out, "write the report here instead of stdout");
  evalc->add_option("--out-dir", common.out_dir, "where resolved_config.json goes")->capture_default_str();

  TopicsArgs topics_args;
  auto* topics = app.add_subcommand("topics", "print the top words of each topic");
  topics->add_option("--model", topics_args.model, "BATM checkpoint")->required();
  topics->add_option("--corpus-dir", topics_args.corpus_dir, "corpus directory (vocab.txt)")->required();
  topics->add_option("--top-words", topics_args.top_words, "words per topic")->capture_default_str();
  topics->add_option("--format", topics_args.format, "text or json")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  topics->add_option("--out-dir", common.out_dir, "where resolved_config.json goes")->capture_default_str();

  AlignArgs align_args;
  auto* alignc = app.add_subcommand("align", "align two models topic-by-topic and count NPMI wins");
  alignc->add_option("--model-a", align_args.model_a, "first checkpoint (e.g. baseline)")->required();
  alignc->add_option("--model-b", align_args.model_b, "second checkpoint (e.g. distilled)")->required();
  alignc->add_option("--corpus-dir", align_args.corpus_dir, "corpus directory")->required();
  alignc->add_option("--split", align_args.split, "reference split for NPMI")->capture_default_str();
  alignc->add_option("--threshold", align_args.threshold, "number of most-aligned pairs compared head to head (default: all)");
  alignc->add_option("--brackets", align_args.brackets, "divergence brackets for pair sampling; 0 disables")->capture_default_str();
  alignc->add_option("--per-bracket", align_args.per_bracket, "pairs sampled per bracket")->capture_default_str();
  alignc->add_option("--seed", align_args.seed, "sampling seed")->capture_default_str();
  alignc->add_option("--table", align_args.table, "write a text table of the sampled pairs here");
  alignc->add_option("--out", align_args.out, "write the report here instead of stdout");
  alignc->add_option("--out-dir", common.out_dir, "where resolved_config.json goes")->capture_default_str();

  SurrogateArgs sur_args;
  auto* sur = app.add_subcommand("surrogate-teacher", "write corpus-derived teacher logits (BATL)");
  sur->add_option("--corpus-dir", sur_args.corpus_dir, "corpus directory")->required();
  sur->add_option("--split", sur_args.split, "split to score")->capture_default_str();
  sur->add_option("--smoothing", sur_args.smoothing, "background smoothing s")->capture_default_str();
  sur->add_option("--floor", sur_args.floor, "additive floor inside the log")->capture_default_str();
  sur->add_option("--bg-smoothing", sur_args.bg_smoothing, "smoothing for the background frequencies")->capture_default_str();
  sur->add_option("--out", sur_args.out, "output BATL file")->required();
  sur->add_option("--out-dir", common.out_dir, "where resolved_config.json goes")->capture_default_str();

  CheckArgs check_args;
  auto* check = app.add_subcommand("check-teacher", "validate a BATL file against a corpus split");
  check->add_option("--corpus-dir", check_args.corpus_dir, "corpus directory")->required();
  check->add_option("--split", check_args.split, "split the logits belong to")->capture_default_str();
  check->add_option("--teacher-logits", check_args.teacher, "BATL file")->required();
  check->add_option("--out-dir", common.out_dir, "where resolved_config.json goes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, common, overrides);
    if (evalc->parsed()) return cmd_eval(eval_args, common);
    if (topics->parsed()) return cmd_topics(topics_args, common);
    if (alignc->parsed()) return cmd_align(align_args, common);
    if (sur->parsed()) return cmd_surrogate(sur_args, common);
    if (check->parsed()) return cmd_check(check_args, common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}

} // namespace bat::cli
