// SPDX-License-Identifier: Apache-2.0
#pragma once
// Minibatch training with KL annealing, seeded restarts and run directories.
//
// Run directory layout:
//   run-<seed>/checkpoint.batm
//   run-<seed>/metrics.jsonl   one {"epoch","loss","kl_weight","dev_npmi"} per epoch
//   aggregate.json             mean/sd of final dev NPMI plus per-seed finals

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bat/corpus.hpp"
#include "bat/distill.hpp"
#include "bat/ntm.hpp"

namespace bat::trainer {

struct TrainConfig {
  std::size_t topics = 50;
  std::size_t hidden = 300;
  std::size_t epochs = 500;
  std::size_t batch_size = 200;
  double learning_rate = 0.002;
  double alpha = 1.0;
  double dropout = 0.0;
  double anneal = 0.5;
  double background_smoothing = 0.0;
  distill::KdConfig kd{};
  std::uint64_t seed = 1;
  std::size_t restarts = 5;
  bool parallel = false;
  std::size_t top_words = 10;
  std::string dev_split = "dev";

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `cfg`; unknown keys are a ConfigError.
void apply_json(const nlohmann::json& j, TrainConfig& cfg);

/// min(1, step / (anneal * total_steps)).
double kl_weight(std::size_t step, std::size_t total_steps, double anneal);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double kl_weight = 0.0;
  std::optional<double> dev_npmi;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::filesystem::path checkpoint;
  double wall_seconds = 0.0;

  std::optional<double> final_dev_npmi() const;
};

struct BatchEvent {
  std::size_t epoch;
  std::size_t batch;
  std::size_t step;
  double kl_weight;
  ntm::LossParts loss; // batch means
};

struct TrainHooks {
  std::function<void(const BatchEvent&)> on_batch;
};

struct TrainResult {
  RunRecord record;
  ntm::ModelParams params;
};

/// Trains one model with `seed`. `teacher` rows must align with the train
/// split; it is required when lambda > 0 and ignored when lambda == 0.
/// Writes run-<seed>/ under `out_dir` when given.
TrainResult train(const BowCorpus& corpus, const distill::TeacherLogits* teacher, const TrainConfig& cfg,
                  std::uint64_t seed, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const TrainHooks& hooks = {});

std::string metrics_line(const EpochMetrics& m);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0; // sample standard deviation; 0 for a single value
};
MeanSd mean_sd(std::span<const double> values);

struct RestartSummary {
  std::vector<RunRecord> runs;
  MeanSd final_dev_npmi;
};

/// Runs seeds cfg.seed + 0 .. cfg.restarts - 1 and writes aggregate.json.
RestartSummary run_restarts(const BowCorpus& corpus, const distill::TeacherLogits* teacher,
                            const TrainConfig& cfg,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

} // namespace bat::trainer
