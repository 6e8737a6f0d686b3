// AArch64 Advanced SIMD variant. NEON is mandatory on AArch64, so no runtime
// probe is needed beyond the build-time architecture check.

#include <arm_neon.h>

#include <cmath>

#include "fedpoison/kernels.hpp"

namespace fedpoison::kernels {
namespace {

constexpr std::size_t kLanes = 2;

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + kLanes), vld1q_f64(b + i + kLanes));
  }
  for (; i + kLanes <= n; i += kLanes) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void adam_update_neon(double* params, const double* grads, double* m, double* v, std::size_t n,
                      const AdamCoefficients& k) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t g = vld1q_f64(grads + i);
    const float64x2_t mi = vaddq_f64(vmulq_n_f64(vld1q_f64(m + i), k.beta1), vmulq_n_f64(g, k.one_minus_beta1));
    const float64x2_t vi =
        vaddq_f64(vmulq_n_f64(vld1q_f64(v + i), k.beta2), vmulq_n_f64(vmulq_f64(g, g), k.one_minus_beta2));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t m_hat = vdivq_f64(mi, vdupq_n_f64(k.bias_correction1));
    const float64x2_t v_hat = vdivq_f64(vi, vdupq_n_f64(k.bias_correction2));
    const float64x2_t step =
        vdivq_f64(vmulq_n_f64(m_hat, k.lr), vaddq_f64(vsqrtq_f64(v_hat), vdupq_n_f64(k.eps)));
    vst1q_f64(params + i, vsubq_f64(vld1q_f64(params + i), step));
  }
  for (; i < n; ++i) {
    const double g = grads[i];
    m[i] = k.beta1 * m[i] + k.one_minus_beta1 * g;
    v[i] = k.beta2 * v[i] + k.one_minus_beta2 * (g * g);
    const double m_hat = m[i] / k.bias_correction1;
    const double v_hat = v[i] / k.bias_correction2;
    params[i] = params[i] - (k.lr * m_hat) / (std::sqrt(v_hat) + k.eps);
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Isa::neon, dot_neon, axpy_neon, squared_distance_neon,
                                 adam_update_neon};
  return table;
}

}  // namespace fedpoison::kernels
