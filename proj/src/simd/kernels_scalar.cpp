#include "evidencerank/simd/kernels.hpp"

namespace evidencerank::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance_scalar(const double* a, const double* b,
                               std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void gemv_scalar(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(m + r * cols, x, cols);
}

void gemv_t_scalar(const double* m, std::size_t rows, std::size_t cols,
                   const double* x, double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    const double* row = m + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
}

void gram_scalar(const double* columns, std::size_t dims, std::size_t samples,
                 double* g) {
  for (std::size_t a = 0; a < dims; ++a) {
    for (std::size_t b = a; b < dims; ++b) {
      const double v =
          dot_scalar(columns + a * samples, columns + b * samples, samples);
      g[a * dims + b] = v;
      g[b * dims + a] = v;
    }
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarKernels{
    Isa::kScalar,  &dot_scalar,    &squared_distance_scalar,
    &gemv_scalar,  &gemv_t_scalar, &gram_scalar,
};
}  // namespace detail

}  // namespace evidencerank::simd
