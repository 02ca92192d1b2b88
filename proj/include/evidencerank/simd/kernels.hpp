#pragma once

// Dense double-precision kernels used on the hot paths of the evidence solver.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on AArch64) are compiled alongside and picked at runtime from
// CPU feature detection. EVIDENCERANK_SIMD=scalar|avx2|neon overrides the pick.
//
// All matrices are dense row-major buffers. Vector variants reorder
// floating-point sums, so results match the scalar reference to round-off, not
// bitwise.

#include <cstddef>
#include <string_view>

namespace evidencerank::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // sum_i (a[i] - b[i])^2
  double (*squared_distance)(const double* a, const double* b, std::size_t n);

  // y = M x, M is rows x cols.
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols,
               const double* x, double* y);

  // y = M^T x, M is rows x cols, y has cols entries.
  void (*gemv_t)(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* y);

  // g = C C^T for C of shape dims x samples (each row one feature column of
  // the sample matrix). Writes the full symmetric dims x dims result.
  void (*gram)(const double* columns, std::size_t dims, std::size_t samples,
               double* g);
};

bool isa_supported(Isa isa);

// Kernel table for a specific ISA, or nullptr when the ISA was not compiled in
// or the running CPU lacks it.
const KernelTable* kernels_for(Isa isa);

// Kernel table chosen for this process. Resolved once, thread-safe.
const KernelTable& kernels();

std::string_view isa_name(Isa isa);

namespace detail {
extern const KernelTable kScalarKernels;
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();
}  // namespace detail

}  // namespace evidencerank::simd
