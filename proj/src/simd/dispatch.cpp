#include <cstdlib>

#include "evidencerank/simd/kernels.hpp"

namespace evidencerank::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;  // Advanced SIMD is mandatory on AArch64.
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* compiled(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &detail::kScalarKernels;
    case Isa::kAvx2:
      return detail::avx2_kernels();
    case Isa::kNeon:
      return detail::neon_kernels();
  }
  return nullptr;
}

const KernelTable& resolve() {
  if (const char* forced = std::getenv("EVIDENCERANK_SIMD")) {
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (isa_name(isa) == forced) {
        if (const KernelTable* table = kernels_for(isa)) return *table;
      }
    }
  }
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (const KernelTable* table = kernels_for(isa)) return *table;
  }
  return detail::kScalarKernels;
}

}  // namespace

bool isa_supported(Isa isa) { return compiled(isa) != nullptr && cpu_has(isa); }

const KernelTable* kernels_for(Isa isa) {
  return isa_supported(isa) ? compiled(isa) : nullptr;
}

const KernelTable& kernels() {
  static const KernelTable& table = resolve();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

}  // namespace evidencerank::simd
