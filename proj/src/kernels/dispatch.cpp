#include <atomic>
#include <cstdlib>
#include <string>

#include "icam/kernels.hpp"

namespace icam::kernels {

#if defined(ICAM_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif
#if defined(ICAM_HAVE_NEON)
const KernelTable& neon_table_unchecked();
#endif

const KernelTable* avx2_table() {
#if defined(ICAM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(ICAM_HAVE_NEON)
  // Advanced SIMD is mandatory on aarch64.
  return &neon_table_unchecked();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const auto* t = avx2_table()) out.push_back(t);
  if (const auto* t = neon_table()) out.push_back(t);
  return out;
}

namespace {

const KernelTable* find_table(std::string_view name) {
  for (const auto* t : available_tables()) {
    if (name == t->name) return t;
  }
  return nullptr;
}

const KernelTable* default_table() {
  if (const char* env = std::getenv("ICAM_KERNELS"); env != nullptr && *env != '\0') {
    if (const auto* t = find_table(env)) return t;
  }
  const auto tables = available_tables();
  return tables.back();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{default_table()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool set_active_kernels(std::string_view name) {
  const auto* t = find_table(name);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace icam::kernels
