#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace sadi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every stochastic routine takes an explicit generator; there is no global stream.
using Rng = std::mt19937_64;

}  // namespace sadi
