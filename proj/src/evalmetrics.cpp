// SPDX-License-Identifier: Apache-2.0
#include "bat/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "bat/error.hpp"

namespace bat::eval {

using nlohmann::json;

std::vector<TopicWordList> top_words(const Matrix& weights, std::size_t n) {
  if (n > weights.cols())
    throw ConfigError("top_words: n=" + std::to_string(n) + " exceeds V=" + std::to_string(weights.cols()));
  std::vector<TopicWordList> out;
  out.reserve(weights.rows());
  std::vector<WordId> order(weights.cols());
  for (std::size_t k = 0; k < weights.rows(); ++k) {
    auto row = weights.row(k);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](WordId a, WordId b) { return row[a] != row[b] ? row[a] > row[b] : a < b; });
    TopicWordList list{k, {}};
    for (std::size_t i = 0; i < n; ++i) list.words.push_back({order[i], row[order[i]]});
    out.push_back(std::move(list));
  }
  return out;
}

std::vector<TopicWordList> top_words(const ntm::ModelParams& params, std::size_t n) {
  return top_words(params.beta, n);
}

std::uint64_t CooccurrenceCounts::df(WordId w) const {
  auto it = df_.find(w);
  return it == df_.end() ? 0 : it->second;
}

std::uint64_t CooccurrenceCounts::joint(WordId a, WordId b) const {
  auto it = joint_.find(key(a, b));
  return it == joint_.end() ? 0 : it->second;
}

CooccurrenceCounts count_cooccurrence(const PresenceSets& presence, std::span<const WordId> universe) {
  CooccurrenceCounts counts(presence.size());
  std::vector<WordId> words(universe.begin(), universe.end());
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (WordId w : words) counts.set_df(w, 0);

  std::vector<WordId> hits;
  for (const auto& doc : presence) {
    hits.clear();
    std::set_intersection(doc.begin(), doc.end(), words.begin(), words.end(), std::back_inserter(hits));
    for (std::size_t i = 0; i < hits.size(); ++i) {
      counts.set_df(hits[i], counts.df(hits[i]) + 1);
      for (std::size_t j = i + 1; j < hits.size(); ++j) counts.add_joint(hits[i], hits[j], 1);
    }
  }
  return counts;
}

CooccurrenceCounts count_for_topics(const PresenceSets& presence, std::span<const TopicWordList> topics) {
  std::vector<WordId> universe;
  for (const auto& t : topics)
    for (const auto& w : t.words) universe.push_back(w.word);
  return count_cooccurrence(presence, universe);
}

double npmi_pair(WordId a, WordId b, const CooccurrenceCounts& counts) {
  if (counts.doc_count() == 0) throw DataError("npmi: reference counts have zero documents");
  const std::uint64_t da = counts.df(a);
  const std::uint64_t db = counts.df(b);
  const std::uint64_t dab = counts.joint(a, b);
  if (da == 0 || db == 0 || dab == 0) return -1.0;
  const double n = static_cast<double>(counts.doc_count());
  if (dab == counts.doc_count()) return 1.0; // both words in every document
  const double pab = static_cast<double>(dab) / n;
  const double pa = static_cast<double>(da) / n;
  const double pb = static_cast<double>(db) / n;
  const double value = std::log(pab / (pa * pb)) / -std::log(pab);
  return std::clamp(value, -1.0, 1.0);
}

double npmi_topic(const TopicWordList& topic, const CooccurrenceCounts& counts) {
  const auto& w = topic.words;
  if (w.size() < 2) throw ConfigError("npmi_topic: a topic needs at least two words");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = i + 1; j < w.size(); ++j) {
      sum += npmi_pair(w[i].word, w[j].word, counts);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double npmi_model(std::span<const TopicWordList> topics, const CooccurrenceCounts& counts) {
  if (topics.empty()) throw ConfigError("npmi_model: no topics");
  double sum = 0.0;
  for (const auto& t : topics) sum += npmi_topic(t, counts);
  return sum / static_cast<double>(topics.size());
}

CooccurrenceCounts external_counts_load(const std::filesystem::path& path, const Vocabulary& vocab,
                                        std::vector<std::string>* dropped) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open external counts " + path.string());
  std::set<std::string> oov;
  try {
    const json j = json::parse(in);
    const auto doc_count = j.at("doc_count").get<std::uint64_t>();
    CooccurrenceCounts counts(doc_count);
    for (const auto& [token, n] : j.at("df").items()) {
      const std::int64_t id = vocab.find(token);
      if (id < 0) {
        oov.insert(token);
        continue;
      }
      counts.set_df(static_cast<WordId>(id), n.get<std::uint64_t>());
    }
    for (const json& entry : j.at("joint")) {
      if (!entry.is_array() || entry.size() != 3) throw DataError("joint entries must be [token, token, count]");
      const auto a = entry[0].get<std::string>();
      const auto b = entry[1].get<std::string>();
      const std::int64_t ia = vocab.find(a);
      const std::int64_t ib = vocab.find(b);
      if (ia < 0) oov.insert(a);
      if (ib < 0) oov.insert(b);
      if (ia < 0 || ib < 0 || ia == ib) continue;
      counts.set_joint(static_cast<WordId>(ia), static_cast<WordId>(ib), entry[2].get<std::uint64_t>());
    }
    if (!oov.empty())
      std::clog << "warning: " << oov.size() << " reference token(s) in " << path.string()
                << " are not in the vocabulary and were ignored\n";
    if (dropped) dropped->assign(oov.begin(), oov.end());
    return counts;
  } catch (const json::exception& e) {
    throw DataError("malformed external counts " + path.string() + ": " + e.what());
  }
}

std::size_t redundancy_pairs(std::span<const TopicWordList> topics) {
  std::vector<std::vector<WordId>> sets;
  sets.reserve(topics.size());
  for (const auto& t : topics) {
    if (t.words.size() != kDefaultTopWords)
      throw ConfigError("redundancy_pairs: topic " + std::to_string(t.topic) + " has " +
                        std::to_string(t.words.size()) + " words, expected 10");
    std::vector<WordId> s;
    for (const auto& w : t.words) s.push_back(w.word);
    std::sort(s.begin(), s.end());
    sets.push_back(std::move(s));
  }
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j)
      if (sets[i] == sets[j]) ++pairs;
  return pairs;
}

double perplexity(std::span<const BowDocument> docs, const ntm::ModelParams& params, const ntm::PriorLN& prior) {
  if (docs.empty()) throw DataError("perplexity: empty split");
  SeededRng unused(0);
  double loss = 0.0;
  double tokens = 0.0;
  for (const BowDocument& d : docs) {
    const ntm::ForwardTrace t = ntm::encode(d, params, unused, false);
    loss += ntm::recon_loss(d, log_softmax(t.logits)) + ntm::kl_term(t.mu, t.logvar, prior);
    tokens += static_cast<double>(d.length());
  }
  return std::exp(loss / tokens);
}

} // namespace bat::eval
