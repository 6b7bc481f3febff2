// SPDX-License-Identifier: Apache-2.0
#include "bat/distill.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "bat/error.hpp"

static_assert(std::endian::native == std::endian::little, "logit I/O assumes a little-endian host");

namespace bat::distill {

void KdConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0, 1]");
  if (!(temperature >= 1.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 1");
  if (!(clip >= 0.0) || !std::isfinite(clip)) throw ConfigError("clip must be >= 0");
}

TeacherLogits::TeacherLogits(std::size_t docs, std::size_t vocab, std::vector<float> data)
    : docs_(docs), vocab_(vocab), data_(std::move(data)) {
  if (data_.size() != docs_ * vocab_) throw DataError("teacher logits: data length does not match D x V");
}

std::vector<double> TeacherLogits::row_f64(std::size_t d) const {
  auto r = row(d);
  return std::vector<double>(r.begin(), r.end());
}

std::size_t keep_count(double clip, std::uint64_t n_d) {
  if (clip == 0.0) return 0;
  const double target = std::round(clip * static_cast<double>(n_d));
  return std::max<std::size_t>(1, static_cast<std::size_t>(target));
}

PseudoDocument soften_and_clip(std::span<const double> z, std::uint64_t n_d, const KdConfig& cfg) {
  if (n_d < 1) throw DataError("soften_and_clip: document length must be >= 1");
  if (z.empty()) throw DataError("soften_and_clip: empty logit row");
  require_finite(z, "teacher logits");
  const std::size_t V = z.size();

  std::vector<double> scaled(z.begin(), z.end());
  for (double& v : scaled) v /= cfg.temperature;
  PseudoDocument out;
  out.weights = softmax(scaled);

  const std::size_t keep = keep_count(cfg.clip, n_d);
  if (keep > 0 && keep < V) {
    std::vector<std::size_t> order(V);
    std::iota(order.begin(), order.end(), 0);
    // Larger probability first; equal probabilities keep the lower word id.
    auto before = [&](std::size_t a, std::size_t b) {
      return out.weights[a] != out.weights[b] ? out.weights[a] > out.weights[b] : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), before);
    for (std::size_t i = keep; i < V; ++i) out.weights[order[i]] = 0.0;
  }

  double mass = 0.0;
  for (double w : out.weights) mass += w;
  const double factor = static_cast<double>(n_d) / mass;
  for (double& w : out.weights) {
    w *= factor;
    if (w != 0.0) ++out.support;
  }
  return out;
}

double kd_loss(const BowDocument& doc, const PseudoDocument& pseudo, std::span<const double> theta,
               const ntm::ModelParams& params, const KdConfig& cfg) {
  const double recon = ntm::recon_loss(doc, ntm::decode(theta, params, 1.0));
  if (cfg.lambda == 0.0) return recon;
  if (pseudo.weights.size() != params.hyper.vocab_size)
    throw DataError("kd_loss: pseudo-document has V=" + std::to_string(pseudo.weights.size()) +
                    " but the model has V=" + std::to_string(params.hyper.vocab_size));
  const double teacher = ntm::cross_entropy(pseudo.weights, ntm::decode(theta, params, cfg.temperature));
  const double loss = cfg.lambda * cfg.temperature * cfg.temperature * teacher + (1.0 - cfg.lambda) * recon;
  if (!std::isfinite(loss)) throw NumericalError("kd_loss: non-finite loss for '" + doc.id() + "'");
  return loss;
}

TeacherLogits surrogate_teacher(const BowCorpus& corpus, const std::string& split, double smoothing,
                                double floor, double background_smoothing) {
  if (smoothing < 0.0) throw ConfigError("surrogate teacher smoothing must be >= 0");
  if (!(floor > 0.0)) throw ConfigError("surrogate teacher floor must be > 0");
  const auto& docs = corpus.split(split);
  if (docs.empty()) throw DataError("surrogate_teacher: split '" + split + "' is empty");
  const std::size_t V = corpus.vocab_size();
  const std::vector<double> m = background_log_freq(corpus, "train", background_smoothing);
  std::vector<double> bg(V);
  for (std::size_t v = 0; v < V; ++v) bg[v] = std::exp(m[v]);

  std::vector<float> data(docs.size() * V);
  std::vector<double> row(V);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const double n_d = static_cast<double>(docs[d].length());
    for (std::size_t v = 0; v < V; ++v) row[v] = smoothing * bg[v] * n_d + floor;
    for (const BowEntry& e : docs[d].entries()) row[e.word] += e.count;
    for (std::size_t v = 0; v < V; ++v) data[d * V + v] = static_cast<float>(std::log(row[v]));
  }
  return TeacherLogits(docs.size(), V, std::move(data));
}

namespace {

template <class T> void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

} // namespace

void write_teacher_logits(const std::filesystem::path& path, const TeacherLogits& logits) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write teacher logits " + path.string());
  out.write("BATL", 4);
  put<std::uint32_t>(out, kLogitsVersion);
  put<std::uint64_t>(out, logits.docs());
  put<std::uint64_t>(out, logits.vocab_size());
  put<std::uint8_t>(out, 1);
  out.write(reinterpret_cast<const char*>(logits.data().data()),
            static_cast<std::streamsize>(logits.data().size_bytes()));
  if (!out) throw DataError("failed writing teacher logits " + path.string());
}

TeacherLogits load_teacher_logits(const std::filesystem::path& path, std::size_t expected_docs,
                                  std::size_t expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open teacher logits " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::string where = "teacher logits " + path.string() + ": ";
  if (bytes.size() < kLogitsHeaderBytes)
    throw DataError(where + "truncated header: expected " + std::to_string(kLogitsHeaderBytes) +
                    " bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), "BATL", 4) != 0) throw DataError(where + "bad magic");
  std::uint32_t version;
  std::uint64_t docs, vocab;
  std::uint8_t dtype;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&docs, bytes.data() + 8, 8);
  std::memcpy(&vocab, bytes.data() + 16, 8);
  std::memcpy(&dtype, bytes.data() + 24, 1);
  if (version != kLogitsVersion) throw DataError(where + "unsupported version " + std::to_string(version));
  if (dtype != 1) throw DataError(where + "unsupported dtype " + std::to_string(dtype) + " (expected 1 = f32)");
  if (vocab != expected_vocab)
    throw DataError(where + "vocabulary size mismatch (file V=" + std::to_string(vocab) +
                    ", corpus V=" + std::to_string(expected_vocab) + ")");
  if (docs != expected_docs)
    throw DataError(where + "document count mismatch (file D=" + std::to_string(docs) +
                    ", split D=" + std::to_string(expected_docs) + ")");
  const std::uint64_t expected_bytes = kLogitsHeaderBytes + docs * vocab * sizeof(float);
  if (bytes.size() != expected_bytes)
    throw DataError(where + (bytes.size() < expected_bytes ? "truncated payload" : "trailing bytes") +
                    ": expected " + std::to_string(expected_bytes) + " bytes, got " +
                    std::to_string(bytes.size()));
  std::vector<float> data(docs * vocab);
  std::memcpy(data.data(), bytes.data() + kLogitsHeaderBytes, data.size() * sizeof(float));
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw DataError(where + "non-finite entry at row " + std::to_string(i / vocab) + ", column " +
                      std::to_string(i % vocab));
  return TeacherLogits(docs, vocab, std::move(data));
}

} // namespace bat::distill
