#include <arm_neon.h>

#include "icam/kernels.hpp"

namespace icam::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double* y, const double* x, double alpha, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void relu_neon(double* out, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    const uint64x2_t pos = vcgtq_f64(v, vdupq_n_f64(0.0));
    vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(pos, vreinterpretq_u64_f64(v))));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_neon(double* out, const double* x, const double* g, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t pos = vcgtq_f64(vld1q_f64(x + i), vdupq_n_f64(0.0));
    vst1q_f64(out + i, vreinterpretq_f64_u64(vandq_u64(pos, vreinterpretq_u64_f64(vld1q_f64(g + i)))));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void multiply_neon(double* out, const double* a, const double* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void add_squares_neon(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    vst1q_f64(acc + i, vfmaq_f64(vld1q_f64(acc + i), v, v));
  }
  for (; i < n; ++i) acc[i] += x[i] * x[i];
}

constexpr KernelTable kNeon{
    "neon",        dot_neon,         axpy_neon,     sum_neon,
    squared_distance_neon,           relu_neon,     relu_mask_neon,
    multiply_neon,                   add_squares_neon,
};

}  // namespace

const KernelTable& neon_table_unchecked() { return kNeon; }

}  // namespace icam::kernels
