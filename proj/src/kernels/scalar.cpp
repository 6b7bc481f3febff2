// SPDX-License-Identifier: Apache-2.0
#include "bat/kernels.hpp"

#include <cmath>
#include <limits>

namespace bat::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void adam_scalar(const AdamCoeffs& c, double* param, const double* grad,
                 double* m1, double* m2, std::size_t n) {
  const double a1 = 1.0 - c.beta1;
  const double a2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m1[i] = c.beta1 * m1[i] + a1 * g;
    m2[i] = c.beta2 * m2[i] + a2 * (g * g);
    const double mhat = m1[i] / c.bias1;
    const double vhat = m2[i] / c.bias2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

} // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", dot_scalar, axpy_scalar, max_scalar,
                                 scale_scalar, adam_scalar};
  return table;
}

} // namespace bat::kernels
