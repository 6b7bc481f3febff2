// SPDX-License-Identifier: Apache-2.0
#include "bat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "bat/error.hpp"

namespace bat {

namespace fs = std::filesystem;
using nlohmann::json;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty())
      throw DataError("vocabulary: empty token at line " + std::to_string(i + 1));
    if (!index_.emplace(tokens_[i], static_cast<WordId>(i)).second)
      throw DataError("vocabulary: duplicate token '" + tokens_[i] + "' at line " +
                      std::to_string(i + 1));
  }
}

Vocabulary Vocabulary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::int64_t Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

BowDocument::BowDocument(std::string id, std::vector<BowEntry> entries) : id_(std::move(id)) {
  std::sort(entries.begin(), entries.end(),
            [](const BowEntry& a, const BowEntry& b) { return a.word < b.word; });
  for (const BowEntry& e : entries) {
    if (e.count == 0) throw DataError("document '" + id_ + "': zero count for word " +
                                      std::to_string(e.word));
    if (!entries_.empty() && entries_.back().word == e.word)
      entries_.back().count += e.count;
    else
      entries_.push_back(e);
    length_ += e.count;
  }
  if (length_ == 0) throw DataError("document '" + id_ + "': zero-length document");
}

BowCorpus::BowCorpus(Vocabulary vocab, std::map<std::string, std::vector<BowDocument>> splits)
    : vocab_(std::move(vocab)), splits_(std::move(splits)) {
  std::map<std::string, std::string> owner;
  for (const auto& [name, docs] : splits_) {
    std::set<std::string> local;
    for (const BowDocument& d : docs) {
      for (const BowEntry& e : d.entries())
        if (e.word >= vocab_.size())
          throw DataError("split '" + name + "', document '" + d.id() + "': word_id out of range (" +
                          std::to_string(e.word) + " >= V=" + std::to_string(vocab_.size()) + ")");
      auto [it, fresh] = owner.emplace(d.id(), name);
      if (!fresh && it->second != name)
        throw DataError("document id '" + d.id() + "' appears in splits '" + it->second +
                        "' and '" + name + "'");
    }
  }
}

const std::vector<BowDocument>& BowCorpus::split(const std::string& name) const {
  auto it = splits_.find(name);
  if (it == splits_.end()) throw DataError("corpus has no split '" + name + "'");
  return it->second;
}

std::size_t BowCorpus::total_documents() const {
  std::size_t n = 0;
  for (const auto& [_, docs] : splits_) n += docs.size();
  return n;
}

namespace {

BowDocument parse_line(const std::string& line, std::size_t vocab_size) {
  const json j = json::parse(line);
  if (!j.is_object()) throw DataError("expected a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("missing string field \"id\"");
  if (!j.contains("bow") || !j["bow"].is_array()) throw DataError("missing array field \"bow\"");
  std::vector<BowEntry> entries;
  entries.reserve(j["bow"].size());
  for (const json& pair : j["bow"]) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer())
      throw DataError("bow entries must be [word_id, count] integer pairs");
    const auto word = pair[0].get<std::int64_t>();
    const auto count = pair[1].get<std::int64_t>();
    if (word < 0 || static_cast<std::uint64_t>(word) >= vocab_size)
      throw DataError("word_id out of range (" + std::to_string(word) +
                      ", V=" + std::to_string(vocab_size) + ")");
    if (count < 1) throw DataError("count must be >= 1");
    entries.push_back({static_cast<WordId>(word), static_cast<std::uint32_t>(count)});
  }
  return BowDocument(j["id"].get<std::string>(), std::move(entries));
}

} // namespace

std::vector<BowDocument> load_split(const fs::path& path, std::size_t vocab_size) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file " + path.string());
  std::vector<BowDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(parse_line(line, vocab_size));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed line: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

void save_split(const fs::path& path, std::span<const BowDocument> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write split file " + path.string());
  for (const BowDocument& d : docs) {
    json bow = json::array();
    for (const BowEntry& e : d.entries()) bow.push_back({e.word, e.count});
    out << json{{"id", d.id()}, {"bow", bow}}.dump() << '\n';
  }
}

BowCorpus load_corpus(const fs::path& vocab_path, const std::map<std::string, fs::path>& split_paths) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  std::map<std::string, std::vector<BowDocument>> splits;
  for (const auto& [name, path] : split_paths) splits[name] = load_split(path, vocab.size());
  return BowCorpus(std::move(vocab), std::move(splits));
}

BowCorpus load_corpus_dir(const fs::path& dir) {
  std::map<std::string, fs::path> paths;
  for (const char* name : {"train", "dev", "test"}) {
    fs::path p = dir / (std::string(name) + ".jsonl");
    if (fs::exists(p)) paths[name] = p;
  }
  if (!paths.count("train")) throw DataError("corpus directory " + dir.string() + " has no train.jsonl");
  return load_corpus(dir / "vocab.txt", paths);
}

void save_corpus_dir(const BowCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  corpus.vocabulary().save(dir / "vocab.txt");
  for (const auto& [name, docs] : corpus.splits()) save_split(dir / (name + ".jsonl"), docs);
}

std::vector<double> background_log_freq(const BowCorpus& corpus, const std::string& split,
                                        double smoothing) {
  const auto& docs = corpus.split(split);
  if (docs.empty()) throw DataError("background_log_freq: split '" + split + "' is empty");
  if (smoothing < 0.0) throw ConfigError("background smoothing must be >= 0");
  const std::size_t V = corpus.vocab_size();
  std::vector<double> counts(V, 0.0);
  double total = 0.0;
  for (const BowDocument& d : docs)
    for (const BowEntry& e : d.entries()) {
      counts[e.word] += e.count;
      total += e.count;
    }
  const double denom = total + static_cast<double>(V) * smoothing;
  std::vector<double> m(V);
  for (std::size_t v = 0; v < V; ++v) {
    const double num = counts[v] + smoothing;
    if (num <= 0.0)
      throw DataError("background_log_freq: word '" + corpus.vocabulary().token(static_cast<WordId>(v)) +
                      "' never occurs in split '" + split + "'; use a positive smoothing");
    m[v] = std::log(num / denom);
  }
  return m;
}

PresenceSets doc_term_presence(std::span<const BowDocument> docs) {
  PresenceSets out;
  out.reserve(docs.size());
  for (const BowDocument& d : docs) {
    std::vector<WordId> words;
    words.reserve(d.entries().size());
    for (const BowEntry& e : d.entries()) words.push_back(e.word);
    out.push_back(std::move(words));
  }
  return out;
}

PresenceSets doc_term_presence(const BowCorpus& corpus, const std::string& split) {
  return doc_term_presence(corpus.split(split));
}

} // namespace bat
