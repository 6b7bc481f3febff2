// SPDX-License-Identifier: Apache-2.0
#pragma once
// Knowledge distillation from a document-autoencoder teacher.
//
// The teacher supplies unnormalized word scores z_d for every document. They
// are softened at temperature T, optionally clipped to the top round(c * N_d)
// words, and rescaled to the document length to form a pseudo-document that
// the topic model reconstructs alongside the observed counts.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bat/corpus.hpp"
#include "bat/ntm.hpp"

namespace bat::distill {

struct KdConfig {
  double lambda = 0.75;
  double temperature = 2.0;
  double clip = 0.0; // 0 disables clipping

  void validate() const;
};

/// D x V teacher scores, stored as 32-bit floats; row order follows the split file.
class TeacherLogits {
public:
  TeacherLogits() = default;
  TeacherLogits(std::size_t docs, std::size_t vocab, std::vector<float> data);

  std::size_t docs() const { return docs_; }
  std::size_t vocab_size() const { return vocab_; }
  std::span<const float> row(std::size_t d) const { return {data_.data() + d * vocab_, vocab_}; }
  std::vector<double> row_f64(std::size_t d) const;
  std::span<const float> data() const { return data_; }

private:
  std::size_t docs_ = 0;
  std::size_t vocab_ = 0;
  std::vector<float> data_;
};

struct PseudoDocument {
  std::vector<double> weights; // non-negative, sums to N_d
  std::size_t support = 0;
};

/// Number of teacher words kept for a document of length n_d; 0 means "all".
std::size_t keep_count(double clip, std::uint64_t n_d);

PseudoDocument soften_and_clip(std::span<const double> z, std::uint64_t n_d, const KdConfig& cfg);

/// lambda * T^2 * CE(pseudo, decode(theta, T)) + (1 - lambda) * L_R(doc, decode(theta, 1)).
/// With lambda == 0 the teacher term is skipped and the result is L_R exactly.
double kd_loss(const BowDocument& doc, const PseudoDocument& pseudo, std::span<const double> theta,
               const ntm::ModelParams& params, const KdConfig& cfg);

/// Teacher stand-in built from the corpus itself:
///   z_{d,v} = log(count_{d,v} + s * exp(m_v) * N_d + floor)
/// with m the train-split background.
TeacherLogits surrogate_teacher(const BowCorpus& corpus, const std::string& split, double smoothing,
                                double floor = 1e-10, double background_smoothing = 0.0);

// "BATL" binary format, little-endian:
//   magic "BATL" | version u32 = 1 | D u64 | V u64 | dtype u8 = 1 (f32) | D*V f32 row-major
inline constexpr std::uint32_t kLogitsVersion = 1;
inline constexpr std::size_t kLogitsHeaderBytes = 4 + 4 + 8 + 8 + 1;

void write_teacher_logits(const std::filesystem::path& path, const TeacherLogits& logits);
TeacherLogits load_teacher_logits(const std::filesystem::path& path, std::size_t expected_docs,
                                  std::size_t expected_vocab);

} // namespace bat::distill
