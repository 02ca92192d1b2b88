#include "evidencerank/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "evidencerank/error.hpp"
#include "evidencerank/simd/kernels.hpp"

namespace evidencerank::linalg {
namespace {

constexpr double kZeroEigenTolerance = 1e-10;
constexpr double kNegativeEigenTolerance = 1e-8;

std::size_t size_of(Eigen::Index n) { return static_cast<std::size_t>(n); }

}  // namespace

Matrix gram(const FeatureMatrix& features) {
  if (features.rows() < 1 || features.cols() < 1) {
    throw InvalidInput("gram: feature matrix must be at least 1 x 1");
  }
  if (!features.allFinite()) {
    throw InvalidInput("gram: feature matrix has non-finite entries");
  }
  // Feature columns laid out contiguously for the kernel.
  const Matrix columns = features;
  const std::size_t dims = size_of(features.cols());
  const std::size_t samples = size_of(features.rows());

  RowMatrix g(features.cols(), features.cols());
  simd::kernels().gram(columns.data(), dims, samples, g.data());
  Matrix sym = 0.5 * (g + g.transpose());
  return sym;
}

EigenSystem sym_eig(const Matrix& g) {
  if (g.rows() != g.cols() || g.rows() < 1) {
    throw InvalidInput("sym_eig: matrix must be square and non-empty");
  }
  if (!g.allFinite()) throw InvalidInput("sym_eig: matrix has non-finite entries");

  Eigen::SelfAdjointEigenSolver<Matrix> solver(g, Eigen::ComputeEigenvectors);
  const double scale = max_abs(g);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sym_eig: eigensolver did not converge (D=" << g.rows()
        << ", max|G|=" << scale << ", trace=" << g.trace() << ")";
    throw NumericFailure(msg.str());
  }

  const Eigen::Index d = g.rows();
  const Vector& ascending = solver.eigenvalues();
  const double smallest = ascending(0);
  if (smallest < -kNegativeEigenTolerance * std::max(1.0, scale)) {
    std::ostringstream msg;
    msg << "sym_eig: matrix is not positive semidefinite (min eigenvalue "
        << smallest << ", max|G|=" << scale << ", largest eigenvalue "
        << ascending(d - 1) << ")";
    throw NumericFailure(msg.str());
  }

  EigenSystem eig;
  eig.sigma.resize(d);
  eig.vectors.resize(d, d);
  const double zero_below = kZeroEigenTolerance * scale;
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;
    const double value = ascending(src);
    eig.sigma(i) = value < zero_below ? 0.0 : value;
    eig.vectors.col(i) = solver.eigenvectors().col(src);
  }
  return eig;
}

Vector multiply(const FeatureMatrix& m, const Vector& x) {
  if (m.cols() != x.size()) throw InvalidInput("multiply: shape mismatch");
  Vector y(m.rows());
  simd::kernels().gemv(m.data(), size_of(m.rows()), size_of(m.cols()), x.data(),
                       y.data());
  return y;
}

Vector multiply_transposed(const FeatureMatrix& m, const Vector& x) {
  if (m.rows() != x.size()) throw InvalidInput("multiply_transposed: shape mismatch");
  Vector y(m.cols());
  simd::kernels().gemv_t(m.data(), size_of(m.rows()), size_of(m.cols()), x.data(),
                         y.data());
  return y;
}

// A column-major V, read as row-major, is V^T.
Vector project(const Matrix& v, const Vector& x) {
  if (v.rows() != x.size()) throw InvalidInput("project: shape mismatch");
  Vector y(v.cols());
  simd::kernels().gemv(v.data(), size_of(v.cols()), size_of(v.rows()), x.data(),
                       y.data());
  return y;
}

Vector unproject(const Matrix& v, const Vector& coeffs) {
  if (v.cols() != coeffs.size()) throw InvalidInput("unproject: shape mismatch");
  Vector y(v.rows());
  simd::kernels().gemv_t(v.data(), size_of(v.cols()), size_of(v.rows()),
                         coeffs.data(), y.data());
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
  return simd::kernels().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("squared_distance: length mismatch");
  return simd::kernels().squared_distance(a.data(), b.data(), a.size());
}

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace evidencerank::linalg
