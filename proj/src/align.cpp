// SPDX-License-Identifier: Apache-2.0
#include "bat/align.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "bat/error.hpp"

namespace bat::align {

namespace {

constexpr double kSimplexTol = 1e-8;

void require_simplex(std::span<const double> p, const char* which) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string("js_divergence: ") + which + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) throw ConfigError(std::string("js_divergence: ") + which + " does not sum to 1");
}

} // namespace

std::vector<std::vector<double>> topic_distributions(const ntm::ModelParams& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.hyper.topics);
  std::vector<double> theta(params.hyper.topics, 0.0);
  for (std::size_t k = 0; k < params.hyper.topics; ++k) {
    theta[k] = 1.0;
    out.push_back(softmax(ntm::decoder_logits(theta, params)));
    theta[k] = 0.0;
  }
  return out;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw ConfigError("js_divergence: length mismatch");
  require_simplex(p, "p");
  require_simplex(q, "q");
  double kl_p = 0.0;
  double kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / mid);
    if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / mid);
  }
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::numbers::ln2);
}

Matrix jsd_matrix(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = js_divergence(a[i], b[j]);
  return m;
}

std::vector<AlignedPair> competitive_link(const Matrix& jsd) {
  if (jsd.rows() == 0 || jsd.cols() == 0) throw ConfigError("competitive_link: empty model");
  // Sorting every edge once and scanning is the same as repeatedly taking the
  // minimum over the remaining edges.
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  edges.reserve(jsd.size());
  for (std::size_t i = 0; i < jsd.rows(); ++i)
    for (std::size_t j = 0; j < jsd.cols(); ++j) edges.emplace_back(jsd(i, j), i, j);
  std::sort(edges.begin(), edges.end());

  std::vector<bool> used_a(jsd.rows(), false), used_b(jsd.cols(), false);
  const std::size_t want = std::min(jsd.rows(), jsd.cols());
  std::vector<AlignedPair> pairs;
  for (const auto& [d, i, j] : edges) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    pairs.push_back({i, j, d, 0.0, 0.0});
    if (pairs.size() == want) break;
  }
  return pairs;
}

void attach_npmi(std::vector<AlignedPair>& pairs, std::span<const double> npmi_a, std::span<const double> npmi_b) {
  for (const AlignedPair& p : pairs)
    if (p.topic_a >= npmi_a.size() || p.topic_b >= npmi_b.size())
      throw ConfigError("attach_npmi: pair (" + std::to_string(p.topic_a) + ", " + std::to_string(p.topic_b) +
                        ") has no NPMI score");
  for (AlignedPair& p : pairs) {
    p.npmi_a = npmi_a[p.topic_a];
    p.npmi_b = npmi_b[p.topic_b];
  }
}

HeadToHead head_to_head(std::span<const AlignedPair> pairs, std::size_t threshold) {
  if (threshold > pairs.size())
    throw ConfigError("head_to_head: threshold " + std::to_string(threshold) + " exceeds the " +
                      std::to_string(pairs.size()) + " aligned pairs");
  HeadToHead h;
  for (std::size_t i = 0; i < threshold; ++i) {
    if (pairs[i].npmi_a > pairs[i].npmi_b)
      ++h.wins_a;
    else if (pairs[i].npmi_b > pairs[i].npmi_a)
      ++h.wins_b;
    else
      ++h.ties;
  }
  return h;
}

std::vector<BracketPick> bracket_sample(std::span<const AlignedPair> pairs, std::size_t brackets,
                                        std::size_t per_bracket, SeededRng& rng) {
  if (brackets == 0) throw ConfigError("bracket_sample: need at least one bracket");
  if (pairs.size() < brackets * per_bracket)
    throw ConfigError("bracket_sample: " + std::to_string(pairs.size()) + " pairs cannot fill " +
                      std::to_string(brackets) + " brackets of " + std::to_string(per_bracket));
  std::vector<std::size_t> sorted(pairs.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = i;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].jsd < pairs[b].jsd; });

  const std::size_t block = pairs.size() / brackets;
  std::vector<std::pair<std::size_t, std::size_t>> picks; // (position in sorted, bracket)
  for (std::size_t b = 0; b < brackets; ++b) {
    const std::size_t begin = b * block;
    const std::size_t end = b + 1 == brackets ? pairs.size() : begin + block;
    std::vector<std::size_t> pool(end - begin);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = begin + i;
    for (std::size_t i = 0; i < per_bracket; ++i) {
      std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
      picks.emplace_back(pool[i], b);
    }
  }
  std::sort(picks.begin(), picks.end());
  std::vector<BracketPick> out;
  out.reserve(picks.size());
  for (const auto& [pos, b] : picks) out.push_back({b, pairs[sorted[pos]]});
  return out;
}

} // namespace bat::align
