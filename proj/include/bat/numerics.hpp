// SPDX-License-Identifier: Apache-2.0
#pragma once
// Dense matrices, stable softmax family, seeded randomness and Adam.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bat {

/// Row-major matrix of 64-bit floats. Vectors are stored as 1×n matrices.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix vector(std::size_t n, double fill = 0.0) { return Matrix(1, n, fill); }
  static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws NumericalError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> x, std::string_view what);

/// out_i = x_i - max(x) - log sum_j exp(x_j - max(x)). `out` may alias `x`.
void log_softmax(std::span<const double> x, std::span<double> out);
std::vector<double> log_softmax(std::span<const double> x);
void softmax(std::span<const double> x, std::span<double> out);
std::vector<double> softmax(std::span<const double> x);

/// log(1 + e^x) without overflow.
double softplus(double x);
double sigmoid(double x);

/// One 64-bit seeded stream per training run. Consumers draw in a fixed
/// order (initialization, per-epoch shuffle, per-batch noise) so a seed
/// pins every number a run produces.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  template <class T> void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::vector<double> sample_standard_normal(SeededRng& rng, std::size_t n);

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

/// A trainable tensor paired with its gradient for one optimizer step.
struct ParamSlot {
  std::string_view name;
  Matrix& value;
  const Matrix& grad;
};

/// Bias-corrected Adam. Accumulators are allocated on the first call and
/// bound to slot positions from then on.
void adam_step(std::span<const ParamSlot> slots, AdamState& state);

} // namespace bat
