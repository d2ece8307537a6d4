#pragma once

#include "rca/degradation.hpp"
#include "rca/field_model.hpp"

#include <vector>

namespace rca {

/// Principal-component projection of a mean-centred stack, with the SVD computed once.
class PcaDenoiser {
public:
  explicit PcaDenoiser(Matrix const &Y);

  /// Columns of Y projected on the top-r principal directions, plus the mean.
  Matrix reconstruct(int r) const;
  Vector const &singular_values() const { return singular_values_; }

private:
  Vector mean_;
  Matrix U_;
  Matrix coeffs_; // U^T (Y - mean)
  Vector singular_values_;
};

PsfMatrix pca_denoise(Matrix const &Y, int r, Shape shape);

/// One column per position holding x^a y^b for a + b <= degree, ordered by total degree then by the power of y
/// (degree 2: 1, x, y, x^2, xy, y^2). Coordinates are first mapped affinely onto [-1, 1]^2.
Matrix monomial_weights(std::vector<Position> const &positions, int degree);

struct PolynomialFit {
  Matrix S0;
  Matrix delta_S;
  Matrix A;
  PsfMatrix X;
  double objective_at_zero = 0.0; // objective with delta_S = 0
  double objective = 0.0;
  int cg_iterations = 0;
};

/// min 1/2 ||Y - F((delta_S + S0) A)||^2 + lambda ||delta_S||^2 with A = monomial_weights(positions, degree),
/// by conjugate gradient on the normal equations. S0 holds the nearest-neighbour upsampled mean patch
/// (divided by m_d^2) in its first column and zeros elsewhere.
/// Throws DataError when lambda = 0 and the monomial matrix is rank deficient.
PolynomialFit polynomial_field_fit(Matrix const &Y, DegradationOp const &op, std::vector<Position> const &positions,
                                   int degree, double ridge_lambda, double cg_tol = 1e-8, int max_iters = 5000);

/// argmin_A 1/2 ||Y - F(S A)||^2, column by column, with a 1e-10 relative ridge on the normal equations.
Matrix rca_lsq_weights(Matrix const &Y, DegradationOp const &op, Matrix const &S);

} // namespace rca
