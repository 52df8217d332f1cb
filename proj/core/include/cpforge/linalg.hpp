#pragma once

#include <Eigen/Dense>

namespace cpforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace cpforge
