#include <cmath>

#include "fedpoison/kernels.hpp"

namespace fedpoison::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void adam_update_scalar(double* params, const double* grads, double* m, double* v,
                        std::size_t n, const AdamCoefficients& k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = k.beta1 * m[i] + k.one_minus_beta1 * g;
    v[i] = k.beta2 * v[i] + k.one_minus_beta2 * (g * g);
    const double m_hat = m[i] / k.bias_correction1;
    const double v_hat = v[i] / k.bias_correction2;
    params[i] = params[i] - (k.lr * m_hat) / (std::sqrt(v_hat) + k.eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, dot_scalar, axpy_scalar, squared_distance_scalar,
                                 adam_update_scalar};
  return table;
}

}  // namespace fedpoison::kernels
