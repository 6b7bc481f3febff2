// SPDX-License-Identifier: Apache-2.0
// AArch64 always has Advanced SIMD with f64 lanes; no runtime probe needed.
#include "bat/kernels.hpp"

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace bat::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_neon(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t vm = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(x + i));
    m = vmaxvq_f64(vm);
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void scale_neon(double alpha, double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), alpha));
  for (; i < n; ++i) x[i] *= alpha;
}

void adam_neon(const AdamCoeffs& c, double* param, const double* grad, double* m1,
               double* m2, std::size_t n) {
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t a1 = vdupq_n_f64(1.0 - c.beta1);
  const float64x2_t a2 = vdupq_n_f64(1.0 - c.beta2);
  const float64x2_t bias1 = vdupq_n_f64(c.bias1);
  const float64x2_t bias2 = vdupq_n_f64(c.bias2);
  const float64x2_t lr = vdupq_n_f64(c.lr);
  const float64x2_t eps = vdupq_n_f64(c.eps);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t nm1 = vaddq_f64(vmulq_f64(b1, vld1q_f64(m1 + i)), vmulq_f64(a1, g));
    const float64x2_t nm2 = vaddq_f64(vmulq_f64(b2, vld1q_f64(m2 + i)), vmulq_f64(a2, vmulq_f64(g, g)));
    vst1q_f64(m1 + i, nm1);
    vst1q_f64(m2 + i, nm2);
    const float64x2_t mhat = vdivq_f64(nm1, bias1);
    const float64x2_t vhat = vdivq_f64(nm2, bias2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, mhat), vaddq_f64(vsqrtq_f64(vhat), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m1[i] = c.beta1 * m1[i] + (1.0 - c.beta1) * g;
    m2[i] = c.beta2 * m2[i] + (1.0 - c.beta2) * (g * g);
    param[i] -= c.lr * (m1[i] / c.bias1) / (std::sqrt(m2[i] / c.bias2) + c.eps);
  }
}

} // namespace

const KernelTable* neon_table() {
  static const KernelTable table{"neon", dot_neon, axpy_neon, max_neon, scale_neon, adam_neon};
  return &table;
}

} // namespace bat::kernels
