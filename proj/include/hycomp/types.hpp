#pragma once

#include <Eigen/Dense>

namespace hycomp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace hycomp
