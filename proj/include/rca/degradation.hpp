#pragma once

#include "rca/field_model.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <vector>

namespace rca {

/// Sub-pixel translation in high-resolution pixels, (row, col).
struct Shift {
  double row = 0.0;
  double col = 0.0;
};

enum class DegradationKind { Identity, ShiftDownsample };

/// Per-PSF linear maps M_k = D T_k, where T_k is a separable Lanczos-3 sub-pixel shift and D sums
/// each m_d x m_d high-resolution block into one low-resolution pixel.
///
/// Each M_k is stored as its separable row/column factors (M_k x = R_k X C_k^T on the image), and,
/// for n_x <= materialize_limit, also as an explicit sparse n_y x n_x matrix.
class DegradationOp {
public:
  static constexpr int materialize_limit = 4096;

  /// Identity map on p images of the given shape.
  static DegradationOp identity(Shape shape, int p);

  DegradationKind kind() const { return kind_; }
  int factor() const { return m_d_; }
  Shape hr_shape() const { return hr_; }
  Shape lr_shape() const { return lr_; }
  int count() const { return p_; }
  std::vector<Shift> const &shifts() const { return shifts_; }
  bool materialized() const { return !dense_.empty(); }

  /// Low-resolution row factor D T_row of PSF k (lr_rows x hr_rows).
  Matrix const &row_factor(int k) const { return rows_[k]; }
  Matrix const &col_factor(int k) const { return cols_[k]; }

  /// Explicit M_k (n_y x n_x). Built on demand when the operator was not materialized.
  Eigen::SparseMatrix<double> explicit_matrix(int k) const;

  /// F(X) = [M_1 x_1, ..., M_p x_p].
  Matrix apply(Matrix const &X) const;
  /// F*(Y) = [M_1^T y_1, ..., M_p^T y_p].
  Matrix apply_adjoint(Matrix const &Y) const;
  /// F^2 uses the entrywise squares M_k (.) M_k.
  Matrix apply_squared(Matrix const &X) const;
  Matrix apply_squared_adjoint(Matrix const &Y) const;

  /// Same as apply/apply_adjoint but always through the separable factors.
  Matrix apply_matrix_free(Matrix const &X) const;
  Matrix apply_adjoint_matrix_free(Matrix const &Y) const;

private:
  friend DegradationOp build_operator(std::vector<Shift> const &, int, Shape, bool);

  enum class Mode { Plain, Adjoint, Squared, SquaredAdjoint };
  Matrix run(Matrix const &in, Mode mode, bool allow_sparse) const;

  DegradationKind kind_ = DegradationKind::Identity;
  int m_d_ = 1;
  int p_ = 0;
  Shape hr_;
  Shape lr_;
  std::vector<Shift> shifts_;
  std::vector<Matrix> rows_;
  std::vector<Matrix> cols_;
  std::vector<Eigen::SparseMatrix<double>> dense_;   // explicit M_k
  std::vector<Eigen::SparseMatrix<double>> squared_; // explicit M_k (.) M_k
};

/// 1-D Lanczos-3 shift operator on n samples: out[i] = sum_j w(i - j - delta) x[j], taps renormalized to sum 1.
Matrix lanczos_shift_matrix(int n, double delta);

/// 1-D block-sum operator (n / m_d x n).
Matrix block_sum_matrix(int n, int m_d);

/// M_k = D_{m_d} T_{shift_k}. Throws DataError if m_d < 1, hr_shape is not divisible by m_d or a shift is non-finite.
/// With materialize set, explicit sparse matrices are kept when n_x <= DegradationOp::materialize_limit.
DegradationOp build_operator(std::vector<Shift> const &shifts, int m_d, Shape hr_shape,
                             bool materialize = true);

/// Per-patch shift = (intensity centroid - geometric centre) * m_d, in high-resolution pixels.
/// When the stack carries noise, pixels below detection_kappa * noise_sigma are ignored for the centroid.
std::vector<Shift> estimate_shifts(ObservationStack const &stack, int m_d, double detection_kappa = 3.0);

/// ||X -> F(X A)||_2 by power iteration (relative tolerance 1e-6, at most 200 iterations).
double spectral_norm(DegradationOp const &op, Matrix const &A);

/// <F(F*(Y)), Y> / <Y, Y>: equals m_d^2 for unshifted pure downsampling.
double tight_frame_ratio(DegradationOp const &op, Matrix const &Y);

} // namespace rca
