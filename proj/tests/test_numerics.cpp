// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "bat/error.hpp"
#include "bat/numerics.hpp"

using namespace bat;

TEST_CASE("log_softmax") {
  SUBCASE("symmetric input") {
    const auto out = log_softmax(std::vector<double>{0.0, 0.0});
    CHECK(out[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("large inputs do not overflow") {
    const auto out = log_softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(out[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(std::isfinite(out[1]));
  }
  SUBCASE("matches an extended-precision evaluation") {
    const std::vector<double> x{2.0, 1.0, 0.0};
    long double s = 0.0L;
    for (double v : x) s += std::exp(static_cast<long double>(v));
    const auto out = log_softmax(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long double expect = static_cast<long double>(x[i]) - std::log(s);
      CHECK(std::abs(out[i] - static_cast<double>(expect)) < 1e-15);
    }
  }
  SUBCASE("non-finite input is rejected") {
    CHECK_THROWS_AS(log_softmax(std::vector<double>{0.0, NAN}), NumericalError);
  }
}

TEST_CASE("log_softmax normalizes and is shift invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + trial % 40);
    for (double& v : x) v = d(rng);
    const double c = d(rng) * 50.0;
    std::vector<double> shifted(x);
    for (double& v : shifted) v += c;
    const auto a = log_softmax(x);
    const auto b = log_softmax(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-10);
      total += std::exp(a[i]);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softplus and sigmoid are stable at the extremes") {
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("adam_step") {
  SUBCASE("first step moves by the learning rate") {
    Matrix p = Matrix::vector(3, 1.0), g = Matrix::vector(3, 1.0);
    AdamState s;
    s.config.learning_rate = 0.1;
    const ParamSlot slots[] = {{"p", p, g}};
    adam_step(slots, s);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs((p[i] - 1.0) - (-0.1 / (1.0 + 1e-8))) < 1e-12);
    CHECK(std::abs(p[0] - 0.9) < 1e-6);
    CHECK(s.step == 1);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix p = Matrix::vector(4, 0.5), g = Matrix::vector(4, 0.0);
    AdamState s;
    const ParamSlot slots[] = {{"p", p, g}};
    adam_step(slots, s);
    CHECK(p == Matrix::vector(4, 0.5));
    CHECK(s.step == 1);
  }
  SUBCASE("equal gradients give equal updates") {
    Matrix a = Matrix::vector(2, 0.0), b = Matrix::vector(2, 0.0);
    Matrix ga = Matrix::vector(2, 0.3), gb = Matrix::vector(2, 0.3);
    AdamState s;
    const ParamSlot slots[] = {{"a", a, ga}, {"b", b, gb}};
    for (int i = 0; i < 3; ++i) adam_step(slots, s);
    CHECK(a == b);
  }
  SUBCASE("shape mismatch and non-finite gradients are rejected") {
    Matrix p = Matrix::vector(2), g = Matrix::vector(3);
    AdamState s;
    const ParamSlot bad[] = {{"p", p, g}};
    CHECK_THROWS_AS(adam_step(bad, s), std::invalid_argument);
    Matrix g2 = Matrix::vector(2, NAN);
    AdamState s2;
    const ParamSlot nan[] = {{"encoder.w", p, g2}};
    CHECK_THROWS_WITH_AS(adam_step(nan, s2), doctest::Contains("encoder.w"), NumericalError);
  }
}

TEST_CASE("adam_step commutes with permuting the parameter list") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  std::vector<Matrix> params, grads;
  for (int i = 0; i < 4; ++i) {
    Matrix p(2, 3), g(2, 3);
    for (double& v : p.flat()) v = d(rng);
    for (double& v : g.flat()) v = d(rng);
    params.push_back(p);
    grads.push_back(g);
  }
  const int perm[] = {2, 0, 3, 1};
  std::vector<Matrix> a = params, b;
  std::vector<Matrix> gb;
  for (int i : perm) {
    b.push_back(params[i]);
    gb.push_back(grads[i]);
  }
  AdamState sa, sb;
  for (int step = 0; step < 3; ++step) {
    std::vector<ParamSlot> slots_a, slots_b;
    for (int i = 0; i < 4; ++i) slots_a.push_back({"x", a[i], grads[i]});
    for (int i = 0; i < 4; ++i) slots_b.push_back({"x", b[i], gb[i]});
    adam_step(slots_a, sa);
    adam_step(slots_b, sb);
  }
  for (int i = 0; i < 4; ++i) CHECK(b[i] == a[perm[i]]);
}

TEST_CASE("SeededRng") {
  SUBCASE("same seed, same stream") {
    SeededRng a(42), b(42);
    CHECK(sample_standard_normal(a, 16) == sample_standard_normal(b, 16));
  }
  SUBCASE("different seeds differ") {
    SeededRng a(1), b(2);
    CHECK(sample_standard_normal(a, 16) != sample_standard_normal(b, 16));
  }
  SUBCASE("standard normal moments over 10^6 draws") {
    SeededRng r(2024);
    const auto x = sample_standard_normal(r, 1000000);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= x.size();
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);
  }
  SUBCASE("index stays in range") {
    SeededRng r(7);
    for (int i = 0; i < 1000; ++i) CHECK(r.index(13) < 13);
  }
}
