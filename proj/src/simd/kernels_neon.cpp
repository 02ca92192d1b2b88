#include "evidencerank/simd/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace evidencerank::simd {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    const float64x2_t d1 = vsubq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    acc0 = vfmaq_f64(acc0, d0, d0);
    acc1 = vfmaq_f64(acc1, d1, d1);
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void gemv_neon(const double* m, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_neon(m + r * cols, x, cols);
}

void gemv_t_neon(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m + r * cols;
    const float64x2_t xr = vdupq_n_f64(x[r]);
    std::size_t c = 0;
    for (; c + 2 <= cols; c += 2) {
      vst1q_f64(y + c, vfmaq_f64(vld1q_f64(y + c), vld1q_f64(row + c), xr));
    }
    for (; c < cols; ++c) y[c] += row[c] * x[r];
  }
}

void gram_neon(const double* columns, std::size_t dims, std::size_t samples,
               double* g) {
  for (std::size_t a = 0; a < dims; ++a) {
    for (std::size_t b = a; b < dims; ++b) {
      const double v =
          dot_neon(columns + a * samples, columns + b * samples, samples);
      g[a * dims + b] = v;
      g[b * dims + a] = v;
    }
  }
}

const KernelTable kNeonKernels{
    Isa::kNeon, &dot_neon,    &squared_distance_neon,
    &gemv_neon, &gemv_t_neon, &gram_neon,
};

}  // namespace

namespace detail {
const KernelTable* neon_kernels() { return &kNeonKernels; }
}  // namespace detail

}  // namespace evidencerank::simd

#else

namespace evidencerank::simd::detail {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace evidencerank::simd::detail

#endif
