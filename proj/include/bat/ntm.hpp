// SPDX-License-Identifier: Apache-2.0
#pragma once
// Variational neural topic model with a logistic-normal posterior.
//
//   hidden = softplus(W_in^T x + b_in)         x: raw word counts
//   mu     = W_mu hidden + b_mu
//   logvar = clamp(W_lv hidden + b_lv, -8, 8)
//   theta  = softmax(mu + exp(logvar / 2) * eps)
//   p(w)   = softmax((m + theta^T B) / T)
//
// m is the fixed background log-frequency vector and is never trained.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bat/corpus.hpp"
#include "bat/numerics.hpp"

namespace bat::ntm {

inline constexpr double kLogvarClamp = 8.0;

struct ModelHyper {
  std::size_t topics = 50;
  std::size_t vocab_size = 0;
  std::size_t hidden = 300;
  double alpha = 1.0;
  double dropout = 0.0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Diagonal Gaussian in softmax basis approximating a symmetric Dirichlet.
struct PriorLN {
  std::vector<double> mean;
  std::vector<double> var;
};

/// Laplace approximation of Dirichlet(alpha * 1_K).
PriorLN prior_from_alpha(double alpha, std::size_t topics);

/// Trainable tensors plus the frozen background. The input layer is stored
/// word-major (V x H) so a sparse document touches contiguous rows.
struct ModelParams {
  ModelHyper hyper;
  Matrix embed;      // V x H
  Matrix embed_bias; // 1 x H
  Matrix mean_w;     // K x H
  Matrix mean_b;     // 1 x K
  Matrix logvar_w;   // K x H
  Matrix logvar_b;   // 1 x K
  Matrix beta;       // K x V
  std::vector<double> background;

  /// Zero-filled tensors of the right shapes.
  static ModelParams zeros(const ModelHyper& hyper, std::vector<double> background);
  /// Glorot-uniform weights, zero biases. Draws embed, mean_w, logvar_w, beta in that order.
  static ModelParams initialize(const ModelHyper& hyper, std::vector<double> background,
                                SeededRng& rng);

  static constexpr std::size_t kTensorCount = 7;
  static const std::array<const char*, kTensorCount>& tensor_names();
  std::array<Matrix*, kTensorCount> tensors();
  std::array<const Matrix*, kTensorCount> tensors() const;
};

/// Same layout as the trainable part of ModelParams.
struct Gradients {
  Matrix embed, embed_bias, mean_w, mean_b, logvar_w, logvar_b, beta;

  static Gradients like(const ModelParams& params);
  void zero();
  std::array<Matrix*, ModelParams::kTensorCount> tensors();
  std::array<const Matrix*, ModelParams::kTensorCount> tensors() const;
};

/// Randomness consumed by one training-mode forward pass.
struct NoiseDraw {
  std::vector<double> eps;  // K; all zero in eval mode
  std::vector<double> mask; // H dropout scale factors; empty means no dropout
};

NoiseDraw draw_noise(const ModelHyper& hyper, SeededRng& rng, bool train_mode);

struct ForwardTrace {
  std::vector<double> pre_hidden; // W_in^T x + b_in
  std::vector<double> hidden;     // softplus, after dropout
  std::vector<double> mu;
  std::vector<double> logvar_raw;
  std::vector<double> logvar; // clamped
  NoiseDraw noise;
  std::vector<double> theta;
  std::vector<double> logits; // m + theta^T B (temperature 1)
};

/// Deterministic forward pass given the noise.
ForwardTrace forward(const BowDocument& doc, const ModelParams& params, NoiseDraw noise);
/// Draws noise from `rng` in train mode; eval mode uses eps = 0 and no dropout.
ForwardTrace encode(const BowDocument& doc, const ModelParams& params, SeededRng& rng,
                    bool train_mode);

/// m + theta^T B.
std::vector<double> decoder_logits(std::span<const double> theta, const ModelParams& params);
/// log_softmax((m + theta^T B) / T).
std::vector<double> decode(std::span<const double> theta, const ModelParams& params,
                           double temperature = 1.0);

/// -sum_v count_v * log_probs_v.
double recon_loss(const BowDocument& doc, std::span<const double> log_probs);
/// -sum_v target_v * log_probs_v for a dense target.
double cross_entropy(std::span<const double> target, std::span<const double> log_probs);

double kl_term(std::span<const double> mu, std::span<const double> logvar, const PriorLN& prior);

struct LossWeights {
  double kl_weight = 1.0;
  double lambda = 0.0;      // teacher weight; 0 skips the teacher term entirely
  double temperature = 1.0; // applies to the teacher term only
};

struct LossParts {
  double recon = 0.0;   // L_R at T = 1
  double teacher = 0.0; // cross-entropy of the pseudo-document at T
  double kl = 0.0;
  double total = 0.0;
};

/// Loss of one document given its trace. `pseudo` is the dense teacher
/// pseudo-document (ignored when lambda == 0). When `grads` is non-null the
/// gradient of `total` times `grad_scale` is accumulated into it.
LossParts document_loss(const BowDocument& doc, const ForwardTrace& trace,
                        std::span<const double> pseudo, const ModelParams& params,
                        const PriorLN& prior, const LossWeights& weights,
                        Gradients* grads = nullptr, double grad_scale = 1.0);

struct BatchItem {
  const BowDocument* doc;
  const ForwardTrace* trace;
  std::span<const double> pseudo;
};

/// Gradients of the batch-mean loss; documents are reduced in batch order.
/// Returns the mean loss parts.
LossParts backward(std::span<const BatchItem> batch, const ModelParams& params,
                   const PriorLN& prior, const LossWeights& weights, Gradients& grads);

} // namespace bat::ntm
