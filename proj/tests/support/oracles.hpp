// SPDX-License-Identifier: Apache-2.0
#pragma once
// Test-only reference implementations. Nothing here calls into the code it
// checks except for plain data accessors.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bat/corpus.hpp"
#include "bat/ntm.hpp"

namespace bat::testing {

/// Straight-line per-document loss in extended precision: plain loops,
/// std::exp/std::log only.
long double reference_document_loss(const BowDocument& doc, const ntm::NoiseDraw& noise,
                               std::span<const double> pseudo, const ntm::ModelParams& params,
                               const ntm::PriorLN& prior, const ntm::LossWeights& weights);

struct FdSample {
  const BowDocument* doc;
  ntm::NoiseDraw noise;
  std::vector<double> pseudo;
};

long double reference_batch_loss(std::span<const FdSample> batch, const ntm::ModelParams& params,
                            const ntm::PriorLN& prior, const ntm::LossWeights& weights);

/// Central differences of reference_batch_loss for every trainable entry.
ntm::Gradients finite_difference_gradients(std::span<const FdSample> batch, ntm::ModelParams params,
                                           const ntm::PriorLN& prior, const ntm::LossWeights& weights,
                                           double h = 1e-5);

/// max over entries of |a - f| / (|f| + 1e-8).
double max_relative_error(const Matrix& analytic, const Matrix& fd);

// Co-occurrence by brute force over raw document word lists.
std::uint64_t brute_df(const std::vector<std::vector<WordId>>& docs, WordId w);
std::uint64_t brute_joint(const std::vector<std::vector<WordId>>& docs, WordId a, WordId b);
double brute_npmi_topic(const std::vector<std::vector<WordId>>& docs, const std::vector<WordId>& words);

/// Greedy matching by repeated full scans of the remaining pairs.
std::vector<std::pair<std::size_t, std::size_t>> greedy_oracle(const std::vector<std::vector<double>>& cost);
/// Minimum total cost over all perfect matchings of a square matrix.
double optimal_matching_cost(const std::vector<std::vector<double>>& cost);

/// Welford single-pass mean and sample standard deviation.
std::pair<double, double> streaming_mean_sd(std::span<const double> values);

} // namespace bat::testing
