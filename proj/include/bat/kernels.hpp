// SPDX-License-Identifier: Apache-2.0
#pragma once
// Dense double-precision inner loops used by the model and optimizer.
//
// Every kernel has a portable scalar reference implementation. Vectorized
// variants (AVX2+FMA on x86-64, NEON on aarch64) are compiled when the
// toolchain supports them and picked at runtime from the CPU feature set.
// Set BAT_KERNELS=scalar in the environment to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace bat::kernels {

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1; // 1 - beta1^t
  double bias2; // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  void (*adam)(const AdamCoeffs& c, double* param, const double* grad,
               double* m1, double* m2, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when not compiled in or not supported by this CPU.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// The table used by all library code. Resolved once on first use.
const KernelTable& active();

/// Test hook: route every caller through `table` until reset.
void override_active(const KernelTable* table);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double max(std::span<const double> x) {
  return active().max(x.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) {
  active().scale(alpha, x.data(), x.size());
}

} // namespace bat::kernels
