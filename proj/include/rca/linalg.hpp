#pragma once

#include "rca/field_model.hpp"

#include <functional>

namespace rca {

/// Applies a self-adjoint PSD operator (typically L^T L) to a matrix-shaped argument.
using NormalOperator = std::function<Matrix(Matrix const &)>;

struct PowerIterationResult {
  double norm = 0.0; // sqrt of the top eigenvalue of the normal operator, i.e. ||L||_2
  int iterations = 0;
};

/// Operator norm ||L||_2 from its normal operator L^T L, by power iteration from a fixed pseudo-random start.
PowerIterationResult power_iteration(NormalOperator const &normal, Eigen::Index rows, Eigen::Index cols,
                                     double rel_tol = 1e-6, int max_iters = 200);

/// Frobenius inner product.
inline double dot(Matrix const &a, Matrix const &b) { return (a.array() * b.array()).sum(); }

} // namespace rca
