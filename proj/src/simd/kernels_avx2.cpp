#include "evidencerank/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#define EVIDENCERANK_AVX2 __attribute__((target("avx2,fma")))

namespace evidencerank::simd {
namespace {

// Samples per gram panel: the six 4 KiB column slices touched by one 2x4
// block stay resident in L1.
constexpr std::size_t kGramPanel = 512;

EVIDENCERANK_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  const __m128d high = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high));
}

EVIDENCERANK_AVX2 double dot_avx2(const double* a, const double* b,
                                  std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1),
                                  _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

EVIDENCERANK_AVX2 double squared_distance_avx2(const double* a, const double* b,
                                               std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

EVIDENCERANK_AVX2 void gemv_avx2(const double* m, std::size_t rows,
                                 std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = m + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d xv = _mm256_loadu_pd(x + c);
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + c), xv, acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + c), xv, acc1);
      acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + c), xv, acc2);
      acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + c), xv, acc3);
    }
    double s0 = hsum(acc0), s1 = hsum(acc1), s2 = hsum(acc2), s3 = hsum(acc3);
    for (; c < cols; ++c) {
      s0 += r0[c] * x[c];
      s1 += r1[c] * x[c];
      s2 += r2[c] * x[c];
      s3 += r3[c] * x[c];
    }
    y[r] = s0;
    y[r + 1] = s1;
    y[r + 2] = s2;
    y[r + 3] = s3;
  }
  for (; r < rows; ++r) y[r] = dot_avx2(m + r * cols, x, cols);
}

EVIDENCERANK_AVX2 void gemv_t_avx2(const double* m, std::size_t rows,
                                   std::size_t cols, const double* x,
                                   double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = m + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    const __m256d x0 = _mm256_set1_pd(x[r]);
    const __m256d x1 = _mm256_set1_pd(x[r + 1]);
    const __m256d x2 = _mm256_set1_pd(x[r + 2]);
    const __m256d x3 = _mm256_set1_pd(x[r + 3]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(y + c);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + c), x0, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + c), x1, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + c), x2, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + c), x3, acc);
      _mm256_storeu_pd(y + c, acc);
    }
    for (; c < cols; ++c) {
      y[c] += r0[c] * x[r] + r1[c] * x[r + 1] + r2[c] * x[r + 2] +
              r3[c] * x[r + 3];
    }
  }
  for (; r < rows; ++r) {
    const double* row = m + r * cols;
    const __m256d xr = _mm256_set1_pd(x[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      _mm256_storeu_pd(
          y + c, _mm256_fmadd_pd(_mm256_loadu_pd(row + c), xr, _mm256_loadu_pd(y + c)));
    }
    for (; c < cols; ++c) y[c] += row[c] * x[r];
  }
}

// Accumulates the 2 x 4 block of dot products between rows a0, a1 and
// b0..b3 over `len` samples into out[0..7] (row-major).
EVIDENCERANK_AVX2 void gram_block_2x4(const double* a0, const double* a1,
                                      const double* b0, std::size_t stride,
                                      std::size_t len, double* out) {
  const double* b1 = b0 + stride;
  const double* b2 = b1 + stride;
  const double* b3 = b2 + stride;
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d x0 = _mm256_loadu_pd(a0 + i);
    const __m256d x1 = _mm256_loadu_pd(a1 + i);
    __m256d v = _mm256_loadu_pd(b0 + i);
    c00 = _mm256_fmadd_pd(x0, v, c00);
    c10 = _mm256_fmadd_pd(x1, v, c10);
    v = _mm256_loadu_pd(b1 + i);
    c01 = _mm256_fmadd_pd(x0, v, c01);
    c11 = _mm256_fmadd_pd(x1, v, c11);
    v = _mm256_loadu_pd(b2 + i);
    c02 = _mm256_fmadd_pd(x0, v, c02);
    c12 = _mm256_fmadd_pd(x1, v, c12);
    v = _mm256_loadu_pd(b3 + i);
    c03 = _mm256_fmadd_pd(x0, v, c03);
    c13 = _mm256_fmadd_pd(x1, v, c13);
  }
  double s[8] = {hsum(c00), hsum(c01), hsum(c02), hsum(c03),
                 hsum(c10), hsum(c11), hsum(c12), hsum(c13)};
  for (; i < len; ++i) {
    s[0] += a0[i] * b0[i];
    s[1] += a0[i] * b1[i];
    s[2] += a0[i] * b2[i];
    s[3] += a0[i] * b3[i];
    s[4] += a1[i] * b0[i];
    s[5] += a1[i] * b1[i];
    s[6] += a1[i] * b2[i];
    s[7] += a1[i] * b3[i];
  }
  for (int k = 0; k < 8; ++k) out[k] += s[k];
}

EVIDENCERANK_AVX2 void gram_avx2(const double* columns, std::size_t dims,
                                 std::size_t samples, double* g) {
  for (std::size_t k = 0; k < dims * dims; ++k) g[k] = 0.0;
  auto upper = [&](std::size_t row, std::size_t col, double v) {
    if (col >= row) g[row * dims + col] += v;
  };
  for (std::size_t p = 0; p < samples; p += kGramPanel) {
    const std::size_t len = samples - p < kGramPanel ? samples - p : kGramPanel;
    std::size_t a = 0;
    for (; a + 2 <= dims; a += 2) {
      const double* a0 = columns + a * samples + p;
      const double* a1 = a0 + samples;
      std::size_t b = a;
      for (; b + 4 <= dims; b += 4) {
        double block[8] = {};
        gram_block_2x4(a0, a1, columns + b * samples + p, samples, len, block);
        for (std::size_t j = 0; j < 4; ++j) {
          upper(a, b + j, block[j]);
          upper(a + 1, b + j, block[4 + j]);
        }
      }
      for (; b < dims; ++b) {
        const double* bc = columns + b * samples + p;
        upper(a, b, dot_avx2(a0, bc, len));
        upper(a + 1, b, dot_avx2(a1, bc, len));
      }
    }
    for (; a < dims; ++a) {
      const double* ac = columns + a * samples + p;
      for (std::size_t b = a; b < dims; ++b) {
        upper(a, b, dot_avx2(ac, columns + b * samples + p, len));
      }
    }
  }
  for (std::size_t r = 0; r < dims; ++r) {
    for (std::size_t c = r + 1; c < dims; ++c) g[c * dims + r] = g[r * dims + c];
  }
}

const KernelTable kAvx2Kernels{
    Isa::kAvx2, &dot_avx2,    &squared_distance_avx2,
    &gemv_avx2, &gemv_t_avx2, &gram_avx2,
};

}  // namespace

namespace detail {
const KernelTable* avx2_kernels() { return &kAvx2Kernels; }
}  // namespace detail

}  // namespace evidencerank::simd

#else

namespace evidencerank::simd::detail {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace evidencerank::simd::detail

#endif
