// SPDX-License-Identifier: Apache-2.0
#include "bat/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bat/error.hpp"
#include "bat/kernels.hpp"

namespace bat {

Matrix Matrix::from_rows(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (data.size() != rows * cols)
    throw std::invalid_argument("Matrix::from_rows: data length does not match shape");
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(std::span<const double> x, std::string_view what) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw NumericalError(std::string(what) + ": non-finite value at index " + std::to_string(i));
}

void log_softmax(std::span<const double> x, std::span<double> out) {
  if (x.empty()) throw std::invalid_argument("log_softmax: empty input");
  require_finite(x, "log_softmax input");
  const double mx = kernels::max(x);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  const double lse = std::log(sum);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mx) - lse;
}

std::vector<double> log_softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  log_softmax(x, out);
  return out;
}

void softmax(std::span<const double> x, std::span<double> out) {
  if (x.empty()) throw std::invalid_argument("softmax: empty input");
  require_finite(x, "softmax input");
  const double mx = kernels::max(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  const double inv = 1.0 / sum;
  for (double& v : out) v *= inv;
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  softmax(x, out);
  return out;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t SeededRng::index(std::size_t n) {
  // Lemire-style rejection keeps the draw unbiased and independent of the stdlib.
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

std::vector<double> sample_standard_normal(SeededRng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

void adam_step(std::span<const ParamSlot> slots, AdamState& state) {
  if (!(state.config.eps > 0.0)) throw std::invalid_argument("adam_step: eps must be positive");
  if (state.first_moment.empty()) {
    for (const ParamSlot& s : slots) {
      state.first_moment.emplace_back(s.value.rows(), s.value.cols());
      state.second_moment.emplace_back(s.value.rows(), s.value.cols());
    }
  }
  if (state.first_moment.size() != slots.size())
    throw std::invalid_argument("adam_step: parameter count changed between steps");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ParamSlot& s = slots[i];
    if (!s.value.same_shape(s.grad) || !s.value.same_shape(state.first_moment[i]))
      throw std::invalid_argument("adam_step: shape mismatch for '" + std::string(s.name) + "'");
    require_finite(s.grad.flat(), "gradient of '" + std::string(s.name) + "'");
  }

  ++state.step;
  const auto t = static_cast<double>(state.step);
  const AdamConfig& cfg = state.config;
  const kernels::AdamCoeffs coeffs{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps,
                                   1.0 - std::pow(cfg.beta1, t), 1.0 - std::pow(cfg.beta2, t)};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const ParamSlot& s = slots[i];
    k.adam(coeffs, s.value.flat().data(), s.grad.flat().data(),
           state.first_moment[i].flat().data(), state.second_moment[i].flat().data(),
           s.value.size());
  }
}

} // namespace bat
