#pragma once

#include <Eigen/Dense>

namespace stsopro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace stsopro
