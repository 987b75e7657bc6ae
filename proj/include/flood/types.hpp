#pragma once

#include <Eigen/Dense>

namespace flood {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace flood
