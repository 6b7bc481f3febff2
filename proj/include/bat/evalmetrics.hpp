// SPDX-License-Identifier: Apache-2.0
#pragma once
// Topic extraction, NPMI coherence, redundancy and perplexity.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bat/corpus.hpp"
#include "bat/ntm.hpp"

namespace bat::eval {

inline constexpr std::size_t kDefaultTopWords = 10;

struct RankedWord {
  WordId word;
  double weight;
};

struct TopicWordList {
  std::size_t topic = 0;
  std::vector<RankedWord> words; // weight non-increasing, ties by lower id
};

/// n highest-weight words per row of `weights`.
std::vector<TopicWordList> top_words(const Matrix& weights, std::size_t n);
/// Ranks by the topic matrix B alone; the shared background is excluded.
std::vector<TopicWordList> top_words(const ntm::ModelParams& params, std::size_t n = kDefaultTopWords);

/// Document frequencies and pairwise joint document frequencies.
class CooccurrenceCounts {
public:
  explicit CooccurrenceCounts(std::uint64_t doc_count = 0) : doc_count_(doc_count) {}

  std::uint64_t doc_count() const { return doc_count_; }
  /// 0 for unseen words.
  std::uint64_t df(WordId w) const;
  /// Unordered; 0 when the pair was never recorded.
  std::uint64_t joint(WordId a, WordId b) const;

  void set_df(WordId w, std::uint64_t n) { df_[w] = n; }
  void set_joint(WordId a, WordId b, std::uint64_t n) { joint_[key(a, b)] = n; }
  void add_joint(WordId a, WordId b, std::uint64_t n) { joint_[key(a, b)] += n; }

private:
  static std::uint64_t key(WordId a, WordId b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
  std::uint64_t doc_count_;
  std::unordered_map<WordId, std::uint64_t> df_;
  std::unordered_map<std::uint64_t, std::uint64_t> joint_;
};

/// Document-level binary co-occurrence restricted to `universe`.
CooccurrenceCounts count_cooccurrence(const PresenceSets& presence, std::span<const WordId> universe);

/// Counts for exactly the words appearing in `topics`.
CooccurrenceCounts count_for_topics(const PresenceSets& presence, std::span<const TopicWordList> topics);

/// log(p(a,b) / (p(a) p(b))) / -log p(a,b); -1 when either word or the pair never occurs.
double npmi_pair(WordId a, WordId b, const CooccurrenceCounts& counts);
/// Mean NPMI over unordered pairs of the topic's words.
double npmi_topic(const TopicWordList& topic, const CooccurrenceCounts& counts);
double npmi_model(std::span<const TopicWordList> topics, const CooccurrenceCounts& counts);

/// Loads reference counts ({"doc_count", "df", "joint"}) and maps tokens onto
/// `vocab`. Tokens outside the vocabulary are dropped and reported in `dropped`.
CooccurrenceCounts external_counts_load(const std::filesystem::path& path, const Vocabulary& vocab,
                                        std::vector<std::string>* dropped = nullptr);

/// Number of unordered topic pairs whose top-10 word sets coincide.
std::size_t redundancy_pairs(std::span<const TopicWordList> topics);
/// A model fails the redundancy filter when more than one pair is identical.
inline bool fails_redundancy_filter(std::size_t pairs) { return pairs > 1; }

/// exp(sum_d (L_R + KL) / sum_d N_d) with eval-mode (eps = 0) posteriors.
double perplexity(std::span<const BowDocument> docs, const ntm::ModelParams& params,
                  const ntm::PriorLN& prior);

} // namespace bat::eval
