// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "bat/distill.hpp"
#include "bat/error.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace bat;
using namespace bat::distill;

namespace {

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

ntm::ModelParams small_params(const BowCorpus& c, std::uint64_t seed) {
  SeededRng rng(seed);
  auto p = ntm::ModelParams::initialize({4, c.vocab_size(), 5, 1.0, 0.0}, background_log_freq(c, "train"), rng);
  for (double& v : p.beta.flat()) v *= 2.0;
  return p;
}

std::string expect_data_error(const std::filesystem::path& p, std::size_t D, std::size_t V) {
  try {
    load_teacher_logits(p, D, V);
  } catch (const DataError& e) {
    return e.what();
  }
  FAIL("expected DataError");
  return {};
}

} // namespace

TEST_CASE("keep_count") {
  CHECK(keep_count(0.0, 100) == 0);
  CHECK(keep_count(0.5, 7) == 4);
  CHECK(keep_count(0.01, 10) == 1);
  CHECK(keep_count(1.0, 2) == 2);
}

TEST_CASE("soften_and_clip examples") {
  const std::vector<double> z{2, 1, 0, -1, -2};
  SUBCASE("top two of five") {
    const auto p = soften_and_clip(z, 2, {0.5, 1.0, 1.0});
    CHECK(p.support == 2);
    CHECK(p.weights[0] == doctest::Approx(1.4621).epsilon(1e-4));
    CHECK(p.weights[1] == doctest::Approx(0.5379).epsilon(1e-4));
    CHECK(p.weights[2] == 0.0);
    CHECK(p.weights[3] == 0.0);
    CHECK(p.weights[4] == 0.0);
  }
  SUBCASE("no clipping keeps every word") {
    const auto p = soften_and_clip(z, 3, {0.5, 2.0, 0.0});
    CHECK(p.support == 5);
    for (double w : p.weights) CHECK(w > 0.0);
    CHECK(sum(p.weights) == doctest::Approx(3.0).epsilon(1e-14));
    const double zsum = std::exp(1.0) + std::exp(0.5) + 1.0 + std::exp(-0.5) + std::exp(-1.0);
    CHECK(p.weights[0] == doctest::Approx(3.0 * std::exp(1.0) / zsum).epsilon(1e-14));
  }
  SUBCASE("a huge temperature flattens to N/V") {
    const auto p = soften_and_clip(z, 10, {0.5, 1e9, 0.0});
    for (double w : p.weights) CHECK(w == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("ties keep the lower word id") {
    const std::vector<double> flat{1, 3, 3, 3, 0};
    const auto p = soften_and_clip(flat, 2, {0.5, 1.0, 1.0});
    CHECK(p.weights[1] > 0.0);
    CHECK(p.weights[2] > 0.0);
    CHECK(p.weights[3] == 0.0);
  }
  SUBCASE("non-finite scores") {
    const std::vector<double> bad{0, std::nan(""), 1};
    CHECK_THROWS_AS(soften_and_clip(bad, 2, {0.5, 1.0, 0.0}), NumericalError);
  }
}

TEST_CASE("soften_and_clip properties") {
  SeededRng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t V = 2 + rng.index(60);
    auto z = sample_standard_normal(rng, V);
    for (double& v : z) v *= 1.0 + 4.0 * rng.uniform();
    const std::uint64_t n = 1 + rng.index(200);
    const double T = 1.0 + 4.0 * rng.uniform();
    const double c = trial % 4 == 0 ? 0.0 : rng.uniform() * 1.5;
    const auto p = soften_and_clip(z, n, {0.5, T, c});
    CAPTURE(trial);
    CHECK(std::abs(sum(p.weights) - static_cast<double>(n)) <= 1e-9 * static_cast<double>(n));
    const auto nonzero = static_cast<std::size_t>(std::count_if(p.weights.begin(), p.weights.end(), [](double w) { return w > 0.0; }));
    const std::size_t k = keep_count(c, n);
    CHECK(nonzero == (k == 0 ? V : std::min(k, V)));
    CHECK(p.support == nonzero);
    for (double w : p.weights) CHECK(w >= 0.0);

    auto shifted = z;
    const double shift = 50.0 * (rng.uniform() - 0.5);
    for (double& v : shifted) v += shift;
    const auto q = soften_and_clip(shifted, n, {0.5, T, c});
    for (std::size_t v = 0; v < V; ++v) CHECK(std::abs(q.weights[v] - p.weights[v]) < 1e-9 * static_cast<double>(n));
  }
}

TEST_CASE("kd_loss") {
  const BowCorpus c = testing::make_synthetic_corpus({.vocab = 30, .topics = 4, .seed = 3});
  const auto params = small_params(c, 9);
  const BowDocument& doc = c.split("train")[2];
  const std::vector<double> theta{0.1, 0.4, 0.3, 0.2};

  SUBCASE("lambda = 0 is exactly the reconstruction loss") {
    const PseudoDocument pseudo{std::vector<double>(30, 1.0), 30};
    const double r = ntm::recon_loss(doc, ntm::decode(theta, params, 1.0));
    CHECK(kd_loss(doc, pseudo, theta, params, {0.0, 2.0, 0.0}) == r);
  }
  SUBCASE("a log-count teacher at T = 1 reproduces the reconstruction loss") {
    std::vector<double> z(30, -1e30);
    for (const auto& e : doc.entries()) z[e.word] = std::log(static_cast<double>(e.count));
    const auto pseudo = soften_and_clip(z, doc.length(), {1.0, 1.0, 0.0});
    const double r = ntm::recon_loss(doc, ntm::decode(theta, params, 1.0));
    CHECK(std::abs(kd_loss(doc, pseudo, theta, params, {1.0, 1.0, 0.0}) - r) < 1e-6);
  }
  SUBCASE("two-term hand evaluation") {
    SeededRng rng(4);
    const auto z = sample_standard_normal(rng, 30);
    const KdConfig cfg{0.5, 2.0, 0.0};
    const auto pseudo = soften_and_clip(z, doc.length(), cfg);
    std::vector<double> eta(30);
    for (std::size_t v = 0; v < 30; ++v) {
      eta[v] = params.background[v];
      for (std::size_t k = 0; k < 4; ++k) eta[v] += theta[k] * params.beta(k, v);
    }
    long double lse1 = 0, lse2 = 0;
    double mx = *std::max_element(eta.begin(), eta.end());
    for (double e : eta) {
      lse1 += std::exp(static_cast<long double>(e - mx));
      lse2 += std::exp(static_cast<long double>((e - mx) / 2.0));
    }
    long double ce = 0, lr = 0;
    for (std::size_t v = 0; v < 30; ++v) ce -= pseudo.weights[v] * ((eta[v] - mx) / 2.0 - std::log(lse2));
    for (const auto& e : doc.entries()) lr -= e.count * ((eta[e.word] - mx) - std::log(lse1));
    const double expect = static_cast<double>(0.5L * 4.0L * ce + 0.5L * lr);
    CHECK(kd_loss(doc, pseudo, theta, params, cfg) == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("agrees with the model loss") {
    SeededRng rng(5);
    const KdConfig cfg{0.75, 2.0, 0.5};
    const auto pseudo = soften_and_clip(sample_standard_normal(rng, 30), doc.length(), cfg);
    const auto noise = ntm::draw_noise(params.hyper, rng, false);
    const auto trace = ntm::forward(doc, params, noise);
    const auto prior = ntm::prior_from_alpha(1.0, 4);
    const auto parts = ntm::document_loss(doc, trace, pseudo.weights, params, prior, {0.0, cfg.lambda, cfg.temperature});
    CHECK(kd_loss(doc, pseudo, trace.theta, params, cfg) == doctest::Approx(parts.total).epsilon(1e-12));
  }
}

TEST_CASE("KdConfig validation") {
  CHECK_THROWS_AS((KdConfig{1.5, 2.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((KdConfig{0.5, 0.5, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((KdConfig{0.5, 2.0, -0.1}.validate()), ConfigError);
  CHECK_NOTHROW((KdConfig{0.0, 1.0, 0.0}.validate()));
}

TEST_CASE("surrogate teacher") {
  const BowCorpus c = testing::make_synthetic_corpus({.vocab = 25, .topics = 3, .seed = 8});
  const auto t = surrogate_teacher(c, "train", 0.01);
  const auto& docs = c.split("train");
  REQUIRE(t.docs() == docs.size());
  REQUIRE(t.vocab_size() == 25);
  const auto m = background_log_freq(c, "train");
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto z = t.row_f64(d);
    std::vector<double> counts(25, 0.0);
    for (const auto& e : docs[d].entries()) counts[e.word] = e.count;
    const double n = static_cast<double>(docs[d].length());
    for (std::size_t v = 0; v < 25; ++v) {
      const double expect = std::log(counts[v] + 0.01 * std::exp(m[v]) * n + 1e-10);
      CHECK(z[v] == doctest::Approx(expect).epsilon(1e-6));
    }
  }
  SUBCASE("zero smoothing leaves the floor for unseen words") {
    const auto z0 = surrogate_teacher(c, "train", 0.0);
    const auto row = z0.row_f64(0);
    for (std::size_t v = 0; v < 25; ++v) CHECK(std::isfinite(row[v]));
  }
}

TEST_CASE("BATL files") {
  testing::TempDir dir;
  std::vector<float> values(15);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.25f * static_cast<float>(i) - 1.5f;
  const TeacherLogits logits(3, 5, values);
  write_teacher_logits(dir / "t.batl", logits);

  SUBCASE("layout") {
    std::ifstream in(dir / "t.batl", std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), {}};
    REQUIRE(bytes.size() == kLogitsHeaderBytes + 15 * 4);
    CHECK(bytes.substr(0, 4) == "BATL");
    std::uint32_t version;
    std::uint64_t d, v;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&d, bytes.data() + 8, 8);
    std::memcpy(&v, bytes.data() + 16, 8);
    CHECK(version == 1);
    CHECK(d == 3);
    CHECK(v == 5);
    CHECK(bytes[24] == 1);
    float f;
    std::memcpy(&f, bytes.data() + kLogitsHeaderBytes + 4 * 7, 4);
    CHECK(f == values[7]);
  }
  SUBCASE("round trip") {
    const auto back = load_teacher_logits(dir / "t.batl", 3, 5);
    CHECK(std::equal(back.data().begin(), back.data().end(), values.begin()));
  }
  SUBCASE("vocabulary mismatch") {
    write_teacher_logits(dir / "v.batl", TeacherLogits(2, 10, std::vector<float>(20, 0.f)));
    CHECK(expect_data_error(dir / "v.batl", 2, 12).find("vocabulary size mismatch") != std::string::npos);
  }
  SUBCASE("document count mismatch") {
    CHECK(expect_data_error(dir / "t.batl", 4, 5).find("document count mismatch") != std::string::npos);
  }
  SUBCASE("truncated payload") {
    std::ifstream in(dir / "t.batl", std::ios::binary);
    const std::string bytes{std::istreambuf_iterator<char>(in), {}};
    const auto p = dir.write("short.batl", bytes.substr(0, bytes.size() - 6));
    const std::string msg = expect_data_error(p, 3, 5);
    CHECK(msg.find("truncated payload: expected 85 bytes, got 79") != std::string::npos);
  }
  SUBCASE("bad magic") {
    const auto p = dir.write("m.batl", std::string("NOPE") + std::string(40, '\0'));
    CHECK(expect_data_error(p, 3, 5).find("bad magic") != std::string::npos);
  }
  SUBCASE("non-finite entry") {
    std::vector<float> bad = values;
    bad[4] = std::numeric_limits<float>::infinity();
    write_teacher_logits(dir / "inf.batl", TeacherLogits(3, 5, bad));
    CHECK_THROWS_AS(load_teacher_logits(dir / "inf.batl", 3, 5), DataError);
  }
}
