#pragma once

#include <Eigen/Dense>

namespace codedcache {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace codedcache
