// SPDX-License-Identifier: Apache-2.0
#pragma once
// Topic-by-topic comparison of two models via greedy JS-divergence matching.

#include <cstddef>
#include <span>
#include <vector>

#include "bat/ntm.hpp"

namespace bat::align {

/// Word distribution of each topic: softmax(m + B_k).
std::vector<std::vector<double>> topic_distributions(const ntm::ModelParams& params);

/// Jensen-Shannon divergence in nats, in [0, ln 2]. Throws ConfigError for
/// inputs that are not probability vectors of equal length.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// rows = topics of model A, cols = topics of model B.
Matrix jsd_matrix(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

struct AlignedPair {
  std::size_t topic_a = 0;
  std::size_t topic_b = 0;
  double jsd = 0.0;
  double npmi_a = 0.0;
  double npmi_b = 0.0;
};

/// Competitive linking: repeatedly take the remaining (a, b) with the lowest
/// divergence, ties to the lexicographically smallest (a, b), and retire both
/// topics. Produces min(rows, cols) pairs in ascending divergence order.
/// NPMI fields are left at zero; use attach_npmi.
std::vector<AlignedPair> competitive_link(const Matrix& jsd);
void attach_npmi(std::vector<AlignedPair>& pairs, std::span<const double> npmi_a,
                 std::span<const double> npmi_b);

struct HeadToHead {
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
};

/// NPMI wins over the first `threshold` pairs (the most aligned ones).
HeadToHead head_to_head(std::span<const AlignedPair> pairs, std::size_t threshold);

struct BracketPick {
  std::size_t bracket;
  AlignedPair pair;
};

/// Splits the divergence-sorted pairs into `brackets` contiguous blocks (the
/// remainder goes to the last block) and samples `per_bracket` pairs without
/// replacement from each. Result is sorted by divergence.
std::vector<BracketPick> bracket_sample(std::span<const AlignedPair> pairs, std::size_t brackets,
                                        std::size_t per_bracket, SeededRng& rng);

} // namespace bat::align
