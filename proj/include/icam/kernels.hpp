#pragma once

// Data-parallel double-precision kernels.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2+FMA on x86-64, NEON on aarch64) are compiled into the library when
// the target supports them and are selected at runtime. Reductions in the
// vector variants use a different summation order than the scalar ones, so
// results agree to rounding, not bit for bit. Within one process the
// selected table never changes unless set_active_kernels() is called.

#include <cstddef>
#include <string_view>
#include <vector>

namespace icam::kernels {

struct KernelTable {
  const char* name;

  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double* y, const double* x, double alpha, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  /// sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  /// out[i] = max(x[i], 0)
  void (*relu)(double* out, const double* x, std::size_t n);
  /// out[i] = x[i] > 0 ? g[i] : 0
  void (*relu_mask)(double* out, const double* x, const double* g, std::size_t n);
  /// out[i] = a[i] * b[i]
  void (*multiply)(double* out, const double* a, const double* b, std::size_t n);
  /// acc[i] += x[i]^2
  void (*add_squares)(double* acc, const double* x, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

/// The table used by the library. Chosen on first use: ICAM_KERNELS
/// (scalar|avx2|neon) if set and available, otherwise the widest supported.
const KernelTable& active();

/// Returns false (and leaves the selection unchanged) if `name` is unknown or
/// unavailable.
bool set_active_kernels(std::string_view name);

}  // namespace icam::kernels
