#pragma once

#include "rca/field_model.hpp"

#include <vector>

namespace rca {

enum class DictionaryKind { Identity, Starlet2 };

/// Analysis operator Phi_s applied to vectorized (row-major) images.
///
/// Starlet2 is the undecimated isotropic B3-spline starlet with second-generation details
/// d_j = c_{j-1} - h * c_j (coarse band dropped), mirror boundaries.
class SparsityDictionary {
public:
  /// Identity on images of the given shape.
  static SparsityDictionary identity(Shape shape);
  /// Starlet with n_scales detail bands; n_scales <= 0 picks floor(log2(min side)) - 2, at least 2.
  static SparsityDictionary starlet(Shape shape, int n_scales = 0);

  DictionaryKind kind() const { return kind_; }
  Shape image_shape() const { return shape_; }
  int n_scales() const { return n_scales_; }
  /// Number of coefficients per image.
  int coefficient_count() const;

  Vector forward(Vector const &image) const;
  Vector adjoint(Vector const &coefficients) const;
  /// (Phi (.) Phi) x, the entrywise-squared operator.
  Vector forward_squared(Vector const &image) const;
  /// Sum of squared weights of each coefficient's linear functional.
  Vector row_squared_sums() const;

  /// Column-wise versions on n x r matrices.
  Matrix forward(Matrix const &images) const;
  Matrix adjoint(Matrix const &coefficients) const;
  Matrix forward_squared(Matrix const &images) const;

private:
  enum class Mode { Forward, Adjoint, Squared };
  void run(double const *in, double *out, Mode mode) const;

  // 1-D factors for one axis: smooth[j] = K_j (cumulative smoothing, K_0 = I), detail[j] = H_j K_j.
  struct AxisOps {
    std::vector<Matrix> smooth;
    std::vector<Matrix> detail;
  };
  static AxisOps axis_ops(int n, int n_scales);

  DictionaryKind kind_ = DictionaryKind::Identity;
  Shape shape_;
  int n_scales_ = 0;
  AxisOps rows_;
  AxisOps cols_;
};

/// 1-D B3-spline smoothing with holes: out[i] = sum_t h_t x[reflect(i + t * step)], h = [1,4,6,4,1]/16.
Matrix b3_smoothing_matrix(int n, int step);

int default_starlet_scales(Shape shape);

} // namespace rca
