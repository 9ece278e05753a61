#pragma once

#include <Eigen/Dense>

namespace udm {

/// Frame-major dense matrix: one row per frame.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace udm
