#pragma once

#include <Eigen/Dense>

namespace wmfrec {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace wmfrec
