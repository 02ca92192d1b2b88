#pragma once

#include <Eigen/Core>

namespace evidencerank {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n x D, one sample per row. Row-major so that each sample is contiguous.
using FeatureMatrix = RowMatrix;

// n x K, column-major so that each regression target Y^(k) is contiguous.
using TargetMatrix = Matrix;

}  // namespace evidencerank
