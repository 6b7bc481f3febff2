// SPDX-License-Identifier: Apache-2.0
#pragma once
// Preprocessed bag-of-words corpora: vocabulary file + JSON Lines splits.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bat {

using WordId = std::uint32_t;

class Vocabulary {
public:
  Vocabulary() = default;
  /// Throws DataError on empty or duplicate tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(WordId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// -1 when absent.
  std::int64_t find(const std::string& token) const;

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, WordId> index_;
};

struct BowEntry {
  WordId word;
  std::uint32_t count;
  friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

/// A document in canonical form: word ids strictly increasing, counts >= 1.
class BowDocument {
public:
  BowDocument() = default;
  /// Sorts entries, merges repeated ids, rejects zero counts and empty docs.
  BowDocument(std::string id, std::vector<BowEntry> entries);

  const std::string& id() const { return id_; }
  std::span<const BowEntry> entries() const { return entries_; }
  std::uint64_t length() const { return length_; }

  friend bool operator==(const BowDocument&, const BowDocument&) = default;

private:
  std::string id_;
  std::vector<BowEntry> entries_;
  std::uint64_t length_ = 0;
};

class BowCorpus {
public:
  BowCorpus() = default;
  /// Validates word ids against the vocabulary and id disjointness across splits.
  BowCorpus(Vocabulary vocab, std::map<std::string, std::vector<BowDocument>> splits);

  const Vocabulary& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  bool has_split(const std::string& name) const { return splits_.count(name) != 0; }
  /// Throws DataError when the split is absent.
  const std::vector<BowDocument>& split(const std::string& name) const;
  const std::map<std::string, std::vector<BowDocument>>& splits() const { return splits_; }
  std::size_t total_documents() const;

private:
  Vocabulary vocab_;
  std::map<std::string, std::vector<BowDocument>> splits_;
};

/// Parses one JSONL split. Errors carry the 1-based line number.
std::vector<BowDocument> load_split(const std::filesystem::path& path, std::size_t vocab_size);
void save_split(const std::filesystem::path& path, std::span<const BowDocument> docs);

BowCorpus load_corpus(const std::filesystem::path& vocab_path,
                      const std::map<std::string, std::filesystem::path>& split_paths);

/// Loads `<dir>/vocab.txt` plus whichever of train/dev/test.jsonl exist.
/// The train split is mandatory.
BowCorpus load_corpus_dir(const std::filesystem::path& dir);
void save_corpus_dir(const BowCorpus& corpus, const std::filesystem::path& dir);

/// m_v = log((n_v + eps) / (N + V*eps)) over the given split.
std::vector<double> background_log_freq(const BowCorpus& corpus, const std::string& split,
                                        double smoothing = 0.0);

/// Distinct word ids per document, each list sorted ascending.
using PresenceSets = std::vector<std::vector<WordId>>;
PresenceSets doc_term_presence(const BowCorpus& corpus, const std::string& split);
PresenceSets doc_term_presence(std::span<const BowDocument> docs);

} // namespace bat
