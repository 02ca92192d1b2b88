#pragma once

#include <span>

#include "evidencerank/types.hpp"

namespace evidencerank::linalg {

// Eigendecomposition of a symmetric positive semidefinite D x D matrix.
// Immutable after construction; safe to share across threads.
struct EigenSystem {
  Vector sigma;  // eigenvalues, descending, all >= 0
  Matrix vectors;  // D x D orthogonal, column i pairs with sigma[i]

  std::size_t dims() const { return static_cast<std::size_t>(sigma.size()); }
};

// F^T F, explicitly symmetrized. Throws InvalidInput on empty or non-finite F.
Matrix gram(const FeatureMatrix& features);

// Symmetric eigendecomposition. Eigenvalues below 1e-10 * max|G| are set to
// exactly zero (this also absorbs negative round-off). Throws NumericFailure if
// the solver does not converge or the matrix has a clearly negative eigenvalue.
EigenSystem sym_eig(const Matrix& g);

// y = M x and y = M^T x through the dispatched SIMD kernels.
Vector multiply(const FeatureMatrix& m, const Vector& x);
Vector multiply_transposed(const FeatureMatrix& m, const Vector& x);

// V^T x and V x for a column-major square V.
Vector project(const Matrix& v, const Vector& x);
Vector unproject(const Matrix& v, const Vector& coeffs);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

// max_ij |m_ij|
double max_abs(const Matrix& m);

}  // namespace evidencerank::linalg
