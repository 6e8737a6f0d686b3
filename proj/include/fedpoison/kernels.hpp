#pragma once

// Data-parallel inner loops shared by the MLP, the optimizer and the
// aggregators. Each instruction set provides a KernelTable; one table is
// selected at process start from the CPU's capabilities (or FEDPOISON_ISA).
//
// Element-wise kernels (axpy, adam_update) are bit-identical across tables.
// Reductions (dot, squared_distance) accumulate in lanes and agree with the
// scalar reference to within a few ulps of the sum of |terms|.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fedpoison::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Constants for one Adam step; the bias corrections are 1 - beta^t.
struct AdamCoefficients {
  double lr;
  double beta1;
  double beta2;
  double one_minus_beta1;
  double one_minus_beta2;
  double bias_correction1;
  double bias_correction2;
  double eps;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*adam_update)(double* params, const double* grads, double* m, double* v, std::size_t n,
                      const AdamCoefficients& k);
};

const KernelTable& scalar_table();

/// Table for the given instruction set, or nullptr when it was not compiled in
/// or the running CPU lacks it.
const KernelTable* table_for(Isa isa);

/// Instruction sets usable on this machine; scalar is always first.
std::vector<Isa> available_isas();

/// The table in use. Defaults to the widest available set unless the
/// FEDPOISON_ISA environment variable names another one.
const KernelTable& active();

/// Switch the active table. Not synchronized: call before starting threads.
/// Returns false (and changes nothing) if the set is unavailable.
bool select(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

}  // namespace fedpoison::kernels
