// SPDX-License-Identifier: Apache-2.0
#include "bat/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace bat::kernels {

#ifndef BAT_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#ifndef BAT_HAVE_NEON
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("BAT_KERNELS"); env && std::string_view(env) == "scalar")
    return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*> g_override{nullptr};

} // namespace

const KernelTable& active() {
  if (const KernelTable* forced = g_override.load(std::memory_order_relaxed)) return *forced;
  static const KernelTable* const detected = detect();
  return *detected;
}

void override_active(const KernelTable* table) { g_override.store(table, std::memory_order_relaxed); }

} // namespace bat::kernels
