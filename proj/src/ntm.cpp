// SPDX-License-Identifier: Apache-2.0
#include "bat/ntm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bat/error.hpp"
#include "bat/kernels.hpp"

namespace bat::ntm {

void ModelHyper::validate() const {
  if (topics < 2) throw ConfigError("topic count K must be >= 2");
  if (vocab_size < 1) throw ConfigError("vocabulary size must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

PriorLN prior_from_alpha(double alpha, std::size_t topics) {
  if (!(alpha > 0.0)) throw ConfigError("prior_from_alpha: alpha must be > 0");
  if (topics < 2) throw ConfigError("prior_from_alpha: K must be >= 2");
  const double k = static_cast<double>(topics);
  const double var = (1.0 / alpha) * (1.0 - 2.0 / k) + 1.0 / (k * alpha);
  return PriorLN{std::vector<double>(topics, 0.0), std::vector<double>(topics, var)};
}

ModelParams ModelParams::zeros(const ModelHyper& h, std::vector<double> background) {
  h.validate();
  if (background.size() != h.vocab_size)
    throw ConfigError("background vector length " + std::to_string(background.size()) +
                      " does not match V=" + std::to_string(h.vocab_size));
  require_finite(background, "background log-frequencies");
  ModelParams p;
  p.hyper = h;
  p.embed = Matrix(h.vocab_size, h.hidden);
  p.embed_bias = Matrix::vector(h.hidden);
  p.mean_w = Matrix(h.topics, h.hidden);
  p.mean_b = Matrix::vector(h.topics);
  p.logvar_w = Matrix(h.topics, h.hidden);
  p.logvar_b = Matrix::vector(h.topics);
  p.beta = Matrix(h.topics, h.vocab_size);
  p.background = std::move(background);
  return p;
}

namespace {

void glorot_uniform(Matrix& w, std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : w.flat()) v = (2.0 * rng.uniform() - 1.0) * limit;
}

} // namespace

ModelParams ModelParams::initialize(const ModelHyper& h, std::vector<double> background,
                                    SeededRng& rng) {
  ModelParams p = zeros(h, std::move(background));
  glorot_uniform(p.embed, h.vocab_size, h.hidden, rng);
  glorot_uniform(p.mean_w, h.hidden, h.topics, rng);
  glorot_uniform(p.logvar_w, h.hidden, h.topics, rng);
  glorot_uniform(p.beta, h.topics, h.vocab_size, rng);
  return p;
}

const std::array<const char*, ModelParams::kTensorCount>& ModelParams::tensor_names() {
  static const std::array<const char*, kTensorCount> names{
      "encoder.embed", "encoder.embed_bias", "encoder.mean_w", "encoder.mean_b",
      "encoder.logvar_w", "encoder.logvar_b", "decoder.beta"};
  return names;
}

std::array<Matrix*, ModelParams::kTensorCount> ModelParams::tensors() {
  return {&embed, &embed_bias, &mean_w, &mean_b, &logvar_w, &logvar_b, &beta};
}

std::array<const Matrix*, ModelParams::kTensorCount> ModelParams::tensors() const {
  return {&embed, &embed_bias, &mean_w, &mean_b, &logvar_w, &logvar_b, &beta};
}

Gradients Gradients::like(const ModelParams& p) {
  Gradients g;
  auto dst = g.tensors();
  auto src = p.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = Matrix(src[i]->rows(), src[i]->cols());
  return g;
}

void Gradients::zero() {
  for (Matrix* m : tensors()) m->fill(0.0);
}

std::array<Matrix*, ModelParams::kTensorCount> Gradients::tensors() {
  return {&embed, &embed_bias, &mean_w, &mean_b, &logvar_w, &logvar_b, &beta};
}

std::array<const Matrix*, ModelParams::kTensorCount> Gradients::tensors() const {
  return {&embed, &embed_bias, &mean_w, &mean_b, &logvar_w, &logvar_b, &beta};
}

NoiseDraw draw_noise(const ModelHyper& h, SeededRng& rng, bool train_mode) {
  NoiseDraw n;
  if (!train_mode) {
    n.eps.assign(h.topics, 0.0);
    return n;
  }
  n.eps = sample_standard_normal(rng, h.topics);
  if (h.dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - h.dropout);
    n.mask.resize(h.hidden);
    for (double& v : n.mask) v = rng.uniform() < h.dropout ? 0.0 : keep_scale;
  }
  return n;
}

std::vector<double> decoder_logits(std::span<const double> theta, const ModelParams& p) {
  if (theta.size() != p.hyper.topics) throw std::invalid_argument("decoder_logits: theta has wrong length");
  std::vector<double> eta(p.background);
  for (std::size_t k = 0; k < theta.size(); ++k) kernels::axpy(theta[k], p.beta.row(k), eta);
  require_finite(eta, "decoder logits");
  return eta;
}

std::vector<double> decode(std::span<const double> theta, const ModelParams& p, double temperature) {
  if (!(temperature >= 1.0)) throw ConfigError("decode: temperature must be >= 1");
  std::vector<double> eta = decoder_logits(theta, p);
  if (temperature != 1.0) kernels::scale(1.0 / temperature, eta);
  log_softmax(eta, eta);
  return eta;
}

ForwardTrace forward(const BowDocument& doc, const ModelParams& p, NoiseDraw noise) {
  const ModelHyper& h = p.hyper;
  if (noise.eps.size() != h.topics) throw std::invalid_argument("forward: noise has wrong length");
  ForwardTrace t;
  t.pre_hidden.assign(p.embed_bias.flat().begin(), p.embed_bias.flat().end());
  for (const BowEntry& e : doc.entries()) {
    if (e.word >= h.vocab_size) throw DataError("forward: word_id out of range");
    kernels::axpy(static_cast<double>(e.count), p.embed.row(e.word), t.pre_hidden);
  }
  t.hidden.resize(h.hidden);
  for (std::size_t j = 0; j < h.hidden; ++j) t.hidden[j] = softplus(t.pre_hidden[j]);
  if (!noise.mask.empty())
    for (std::size_t j = 0; j < h.hidden; ++j) t.hidden[j] *= noise.mask[j];
  require_finite(t.hidden, "encoder hidden activation");

  t.mu.resize(h.topics);
  t.logvar_raw.resize(h.topics);
  t.logvar.resize(h.topics);
  std::vector<double> z(h.topics);
  for (std::size_t k = 0; k < h.topics; ++k) {
    t.mu[k] = kernels::dot(p.mean_w.row(k), t.hidden) + p.mean_b[k];
    t.logvar_raw[k] = kernels::dot(p.logvar_w.row(k), t.hidden) + p.logvar_b[k];
    t.logvar[k] = std::clamp(t.logvar_raw[k], -kLogvarClamp, kLogvarClamp);
    z[k] = t.mu[k] + std::exp(0.5 * t.logvar[k]) * noise.eps[k];
  }
  require_finite(z, "encoder output");
  t.theta = softmax(z);
  t.noise = std::move(noise);
  t.logits = decoder_logits(t.theta, p);
  return t;
}

ForwardTrace encode(const BowDocument& doc, const ModelParams& p, SeededRng& rng, bool train_mode) {
  return forward(doc, p, draw_noise(p.hyper, rng, train_mode));
}

double recon_loss(const BowDocument& doc, std::span<const double> log_probs) {
  double loss = 0.0;
  for (const BowEntry& e : doc.entries()) loss -= static_cast<double>(e.count) * log_probs[e.word];
  return loss;
}

double cross_entropy(std::span<const double> target, std::span<const double> log_probs) {
  double loss = 0.0;
  for (std::size_t v = 0; v < target.size(); ++v)
    if (target[v] != 0.0) loss -= target[v] * log_probs[v];
  return loss;
}

double kl_term(std::span<const double> mu, std::span<const double> logvar, const PriorLN& prior) {
  double kl = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double pv = prior.var[k];
    if (!(pv > 0.0)) throw ConfigError("kl_term: prior variance must be > 0");
    const double diff = prior.mean[k] - mu[k];
    kl += std::exp(logvar[k]) / pv + diff * diff / pv - 1.0 + std::log(pv) - logvar[k];
  }
  return 0.5 * kl;
}

LossParts document_loss(const BowDocument& doc, const ForwardTrace& t, std::span<const double> pseudo,
                        const ModelParams& p, const PriorLN& prior, const LossWeights& w,
                        Gradients* grads, double grad_scale) {
  const ModelHyper& h = p.hyper;
  const std::size_t V = h.vocab_size;
  const std::size_t K = h.topics;
  const bool use_teacher = w.lambda != 0.0;
  if (use_teacher && pseudo.size() != V)
    throw DataError("document_loss: pseudo-document length does not match V");

  LossParts parts;
  std::vector<double> logp1(V);
  log_softmax(t.logits, logp1);
  parts.recon = recon_loss(doc, logp1);

  std::vector<double> logpT;
  if (use_teacher) {
    logpT.resize(V);
    const double inv_t = 1.0 / w.temperature;
    for (std::size_t v = 0; v < V; ++v) logpT[v] = t.logits[v] * inv_t;
    log_softmax(logpT, logpT);
    parts.teacher = cross_entropy(pseudo, logpT);
  }
  parts.kl = kl_term(t.mu, t.logvar, prior);
  const double data = use_teacher ? w.lambda * w.temperature * w.temperature * parts.teacher +
                                        (1.0 - w.lambda) * parts.recon
                                  : parts.recon;
  parts.total = data + w.kl_weight * parts.kl;
  if (!std::isfinite(parts.total)) throw NumericalError("document_loss: non-finite loss for '" + doc.id() + "'");
  if (grads == nullptr) return parts;

  // dL/d(eta), eta = m + theta^T B.
  const double n_d = static_cast<double>(doc.length());
  const double recon_w = use_teacher ? 1.0 - w.lambda : 1.0;
  std::vector<double> g_eta(V);
  for (std::size_t v = 0; v < V; ++v) g_eta[v] = recon_w * (n_d * std::exp(logp1[v]));
  for (const BowEntry& e : doc.entries()) g_eta[e.word] -= recon_w * static_cast<double>(e.count);
  if (use_teacher) {
    // d/d(eta) of T^2 * CE(pseudo, softmax(eta / T)) = T * (sum(pseudo) * p_T - pseudo).
    double mass = 0.0;
    for (double x : pseudo) mass += x;
    const double c = w.lambda * w.temperature;
    for (std::size_t v = 0; v < V; ++v) g_eta[v] += c * (mass * std::exp(logpT[v]) - pseudo[v]);
  }

  // Decoder.
  std::vector<double> g_theta(K);
  for (std::size_t k = 0; k < K; ++k) {
    g_theta[k] = kernels::dot(p.beta.row(k), g_eta);
    kernels::axpy(grad_scale * t.theta[k], g_eta, grads->beta.row(k));
  }

  // Softmax on z, then the reparameterized sample z = mu + exp(logvar/2) * eps.
  double theta_dot = 0.0;
  for (std::size_t k = 0; k < K; ++k) theta_dot += t.theta[k] * g_theta[k];
  std::vector<double> g_mu(K), g_lv(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double g_z = t.theta[k] * (g_theta[k] - theta_dot);
    const double pv = prior.var[k];
    g_mu[k] = g_z + w.kl_weight * (t.mu[k] - prior.mean[k]) / pv;
    double g_logvar = g_z * t.noise.eps[k] * 0.5 * std::exp(0.5 * t.logvar[k]) +
                      w.kl_weight * 0.5 * (std::exp(t.logvar[k]) / pv - 1.0);
    // The clamp is flat outside (-8, 8).
    if (t.logvar_raw[k] <= -kLogvarClamp || t.logvar_raw[k] >= kLogvarClamp) g_logvar = 0.0;
    g_lv[k] = g_logvar;
  }

  // Encoder heads.
  std::vector<double> g_hidden(h.hidden, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    kernels::axpy(grad_scale * g_mu[k], t.hidden, grads->mean_w.row(k));
    grads->mean_b[k] += grad_scale * g_mu[k];
    kernels::axpy(grad_scale * g_lv[k], t.hidden, grads->logvar_w.row(k));
    grads->logvar_b[k] += grad_scale * g_lv[k];
    kernels::axpy(g_mu[k], p.mean_w.row(k), g_hidden);
    kernels::axpy(g_lv[k], p.logvar_w.row(k), g_hidden);
  }

  // Dropout, softplus, input layer.
  std::vector<double> g_pre(h.hidden);
  for (std::size_t j = 0; j < h.hidden; ++j) {
    double g = g_hidden[j];
    if (!t.noise.mask.empty()) g *= t.noise.mask[j];
    g_pre[j] = g * sigmoid(t.pre_hidden[j]);
  }
  kernels::axpy(grad_scale, g_pre, grads->embed_bias.flat());
  for (const BowEntry& e : doc.entries())
    kernels::axpy(grad_scale * static_cast<double>(e.count), g_pre, grads->embed.row(e.word));
  return parts;
}

LossParts backward(std::span<const BatchItem> batch, const ModelParams& p, const PriorLN& prior,
                   const LossWeights& w, Gradients& grads) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  grads.zero();
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossParts mean;
  for (const BatchItem& item : batch) {
    if (item.doc == nullptr || item.trace == nullptr) throw std::invalid_argument("backward: missing trace");
    const LossParts parts = document_loss(*item.doc, *item.trace, item.pseudo, p, prior, w, &grads, scale);
    mean.recon += parts.recon * scale;
    mean.teacher += parts.teacher * scale;
    mean.kl += parts.kl * scale;
    mean.total += parts.total * scale;
  }
  for (const Matrix* g : grads.tensors())
    if (!g->all_finite()) throw NumericalError("backward: non-finite gradient");
  return mean;
}

} // namespace bat::ntm
