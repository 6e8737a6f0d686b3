#include <cstdlib>
#include <string>

#include "fedpoison/kernels.hpp"

namespace fedpoison::kernels {

#if defined(FEDPOISON_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(FEDPOISON_HAVE_NEON)
const KernelTable& neon_table();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &scalar_table();
    case Isa::avx2:
#if defined(FEDPOISON_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_table();
#endif
      return nullptr;
    case Isa::neon:
#if defined(FEDPOISON_HAVE_NEON)
      return &neon_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (table_for(isa) != nullptr) out.push_back(isa);
  }
  return out;
}

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("FEDPOISON_ISA")) {
    const std::string wanted(env);
    for (Isa isa : available_isas()) {
      if (isa_name(isa) == wanted) return table_for(isa);
    }
  }
  return table_for(available_isas().back());
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

bool select(Isa isa) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) return false;
  current() = table;
  return true;
}

}  // namespace fedpoison::kernels
