// SPDX-License-Identifier: Apache-2.0
#include "bat/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>

#include <nlohmann/json.hpp>

#include "bat/checkpoint.hpp"
#include "bat/error.hpp"
#include "bat/evalmetrics.hpp"

namespace bat::trainer {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (topics < 2) throw ConfigError("k must be >= 2");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch-size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("lr must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(anneal > 0.0 && anneal <= 1.0)) throw ConfigError("anneal must be in (0, 1]");
  if (!(background_smoothing >= 0.0)) throw ConfigError("bg-smoothing must be >= 0");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (top_words < 2) throw ConfigError("top-words must be >= 2");
  kd.validate();
}

json to_json(const TrainConfig& c) {
  return json{{"k", c.topics},
              {"hidden", c.hidden},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.learning_rate},
              {"alpha", c.alpha},
              {"dropout", c.dropout},
              {"anneal", c.anneal},
              {"bg_smoothing", c.background_smoothing},
              {"lambda", c.kd.lambda},
              {"temp", c.kd.temperature},
              {"clip", c.kd.clip},
              {"seed", c.seed},
              {"restarts", c.restarts},
              {"parallel", c.parallel},
              {"top_words", c.top_words},
              {"dev_split", c.dev_split}};
}

void apply_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "k") c.topics = v.get<std::size_t>();
      else if (key == "hidden") c.hidden = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "lr") c.learning_rate = v.get<double>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "anneal") c.anneal = v.get<double>();
      else if (key == "bg_smoothing") c.background_smoothing = v.get<double>();
      else if (key == "lambda") c.kd.lambda = v.get<double>();
      else if (key == "temp") c.kd.temperature = v.get<double>();
      else if (key == "clip") c.kd.clip = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "restarts") c.restarts = v.get<std::size_t>();
      else if (key == "parallel") c.parallel = v.get<bool>();
      else if (key == "top_words") c.top_words = v.get<std::size_t>();
      else if (key == "dev_split") c.dev_split = v.get<std::string>();
      else throw ConfigError("unknown training config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid training config value: ") + e.what());
  }
}

double kl_weight(std::size_t step, std::size_t total_steps, double anneal) {
  if (!(anneal > 0.0)) throw ConfigError("kl_weight: anneal must be > 0");
  const double ramp = anneal * static_cast<double>(total_steps);
  if (ramp <= 0.0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / ramp);
}

std::optional<double> RunRecord::final_dev_npmi() const {
  if (epochs.empty()) return std::nullopt;
  return epochs.back().dev_npmi;
}

std::string metrics_line(const EpochMetrics& m) {
  json j{{"epoch", m.epoch}, {"loss", m.loss}, {"kl_weight", m.kl_weight}};
  j["dev_npmi"] = m.dev_npmi ? json(*m.dev_npmi) : json(nullptr);
  return j.dump();
}

TrainResult train(const BowCorpus& corpus, const distill::TeacherLogits* teacher, const TrainConfig& cfg,
                  std::uint64_t seed, const std::optional<fs::path>& out_dir, const TrainHooks& hooks) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const auto& docs = corpus.split("train");
  if (docs.empty()) throw DataError("train split is empty");
  const bool use_teacher = cfg.kd.lambda != 0.0;
  if (use_teacher) {
    if (teacher == nullptr) throw ConfigError("lambda > 0 requires teacher logits");
    if (teacher->docs() != docs.size() || teacher->vocab_size() != corpus.vocab_size())
      throw DataError("teacher logits are " + std::to_string(teacher->docs()) + "x" +
                      std::to_string(teacher->vocab_size()) + " but the train split is " +
                      std::to_string(docs.size()) + "x" + std::to_string(corpus.vocab_size()));
  }

  ntm::ModelHyper hyper{cfg.topics, corpus.vocab_size(), cfg.hidden, cfg.alpha, cfg.dropout};
  SeededRng rng(seed);
  ntm::ModelParams params = ntm::ModelParams::initialize(
      hyper, background_log_freq(corpus, "train", cfg.background_smoothing), rng);
  const ntm::PriorLN prior = ntm::prior_from_alpha(cfg.alpha, cfg.topics);
  ntm::Gradients grads = ntm::Gradients::like(params);
  AdamState adam;
  adam.config.learning_rate = cfg.learning_rate;

  std::optional<PresenceSets> dev_presence;
  if (corpus.has_split(cfg.dev_split) && !corpus.split(cfg.dev_split).empty())
    dev_presence = doc_term_presence(corpus, cfg.dev_split);

  const ntm::LossWeights base_weights{1.0, cfg.kd.lambda, cfg.kd.temperature};
  const std::size_t batches = (docs.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);

  RunRecord record;
  record.seed = seed;
  std::size_t step = 0;
  std::vector<ntm::ForwardTrace> traces;
  std::vector<distill::PseudoDocument> pseudos;
  std::vector<ntm::BatchItem> items;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    double weight = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(docs.size(), begin + cfg.batch_size);
      traces.clear();
      pseudos.clear();
      items.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const BowDocument& d = docs[order[i]];
        traces.push_back(ntm::encode(d, params, rng, true));
        if (use_teacher) pseudos.push_back(distill::soften_and_clip(teacher->row_f64(order[i]), d.length(), cfg.kd));
      }
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t local = i - begin;
        items.push_back({&docs[order[i]], &traces[local],
                         use_teacher ? std::span<const double>(pseudos[local].weights) : std::span<const double>()});
      }
      weight = kl_weight(step, total_steps, cfg.anneal);
      ntm::LossWeights w = base_weights;
      w.kl_weight = weight;
      ntm::LossParts parts;
      try {
        parts = ntm::backward(items, params, prior, w, grads);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what());
      }
      if (hooks.on_batch) hooks.on_batch({epoch, b, step, weight, parts});
      epoch_loss += parts.total * static_cast<double>(end - begin);

      auto p = params.tensors();
      auto g = grads.tensors();
      const auto& names = ntm::ModelParams::tensor_names();
      std::array<ParamSlot, ntm::ModelParams::kTensorCount> slots{
          ParamSlot{names[0], *p[0], *g[0]}, ParamSlot{names[1], *p[1], *g[1]},
          ParamSlot{names[2], *p[2], *g[2]}, ParamSlot{names[3], *p[3], *g[3]},
          ParamSlot{names[4], *p[4], *g[4]}, ParamSlot{names[5], *p[5], *g[5]},
          ParamSlot{names[6], *p[6], *g[6]}};
      adam_step(slots, adam);
      ++step;
    }

    EpochMetrics m{epoch, epoch_loss / static_cast<double>(docs.size()), weight, std::nullopt};
    if (!std::isfinite(m.loss)) throw NumericalError("epoch " + std::to_string(epoch) + ": non-finite loss");
    if (dev_presence) {
      const auto topics = eval::top_words(params, std::min(cfg.top_words, corpus.vocab_size()));
      m.dev_npmi = eval::npmi_model(topics, eval::count_for_topics(*dev_presence, topics));
    }
    record.epochs.push_back(m);
  }

  if (out_dir) {
    const fs::path run_dir = *out_dir / ("run-" + std::to_string(seed));
    fs::create_directories(run_dir);
    record.checkpoint = run_dir / "checkpoint.batm";
    save_checkpoint(record.checkpoint, params);
    std::ofstream metrics(run_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    for (const EpochMetrics& m : record.epochs) metrics << metrics_line(m) << '\n';
    if (!metrics) throw DataError("failed writing " + (run_dir / "metrics.jsonl").string());
  }
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(record), std::move(params)};
}

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_sd: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

RestartSummary run_restarts(const BowCorpus& corpus, const distill::TeacherLogits* teacher,
                            const TrainConfig& cfg, const std::optional<fs::path>& out_dir) {
  cfg.validate();
  RestartSummary summary;
  if (cfg.parallel && cfg.restarts > 1) {
    std::vector<std::future<TrainResult>> futures;
    for (std::size_t r = 0; r < cfg.restarts; ++r)
      futures.push_back(std::async(std::launch::async, [&, r] { return train(corpus, teacher, cfg, cfg.seed + r, out_dir); }));
    for (auto& f : futures) summary.runs.push_back(f.get().record);
  } else {
    for (std::size_t r = 0; r < cfg.restarts; ++r)
      summary.runs.push_back(train(corpus, teacher, cfg, cfg.seed + r, out_dir).record);
  }

  std::vector<double> finals;
  json per_seed = json::array();
  for (const RunRecord& run : summary.runs) {
    const auto f = run.final_dev_npmi();
    per_seed.push_back({{"seed", run.seed}, {"final_dev_npmi", f ? json(*f) : json(nullptr)}});
    if (f) finals.push_back(*f);
  }
  if (!finals.empty()) summary.final_dev_npmi = mean_sd(finals);

  if (out_dir) {
    json agg{{"per_seed", per_seed}};
    agg["mean"] = finals.empty() ? json(nullptr) : json(summary.final_dev_npmi.mean);
    agg["sd"] = finals.empty() ? json(nullptr) : json(summary.final_dev_npmi.sd);
    std::ofstream out(*out_dir / "aggregate.json", std::ios::binary | std::ios::trunc);
    out << agg.dump(2) << '\n';
  }
  return summary;
}

} // namespace bat::trainer
