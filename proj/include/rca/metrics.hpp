#pragma once

#include "rca/field_model.hpp"

#include <iosfwd>
#include <utility>
#include <vector>

namespace rca {

using ImageRef = Eigen::Ref<RowMajorMatrix const>;

/// Intensity centroid (row, col) of the image with negative pixels clamped to zero.
/// Throws DataError when that image has no positive flux.
std::pair<double, double> centroid(ImageRef image);

/// sum_ij (i - i_c)^p (j - j_c)^q x_ij over the raw image, i = row, j = column.
double central_moment(ImageRef image, int p, int q);

/// (e1, e2) = ((mu20 - mu02), 2 mu11) / (mu20 + mu02). Throws DataError when mu20 + mu02 = 0.
std::pair<double, double> ellipticity(ImageRef image);

/// sqrt(sum ((i - i_c)^2 + (j - j_c)^2) x_ij / sum x_ij)
double psf_size(ImageRef image);

struct PsfShape {
  double e1 = 0.0;
  double e2 = 0.0;
  double size = 0.0;
  double row_c = 0.0;
  double col_c = 0.0;
};

PsfShape measure_shape(ImageRef image);

struct ShapeReport {
  std::vector<PsfShape> truth;
  std::vector<PsfShape> estimate;
  std::vector<double> sq_error; // ||x_i - x_hat_i||^2 per PSF
  double E_gamma = 0.0;         // mean ||gamma(x_i) - gamma(x_hat_i)||_2
  double B_gamma = 0.0;         // nuclear norm of the 2 x p ellipticity-difference matrix
  double E_S = 0.0;             // mean |size(x_i) - size(x_hat_i)|
  double sigma_S = 0.0;         // standard deviation of |size(x_i) - size(x_hat_i)|
  double mse = 0.0;             // ||X - X_hat||_F^2 / (n p)
  double nmse = 0.0;            // mean ||x_i - x_hat_i||^2 / ||x_i||^2
};

/// Nuclear norm of a 2 x p matrix.
double nuclear_norm(Matrix const &M);

/// Throws DataError when the two fields differ in shape or count.
ShapeReport field_errors(PsfMatrix const &truth, PsfMatrix const &estimate);

/// p per-PSF rows, then one aggregate row with psf = "all".
void write_shape_report_csv(ShapeReport const &report, std::ostream &out);

/// ||s||^2 / (N sigma^2); infinite sigma gives 0.
double snr(Vector const &signal, double noise_sigma, int N);

/// ||s|| / sqrt(N snr). Throws DataError for a non-positive target.
double noise_for_snr(Vector const &signal, double target_snr, int N);

} // namespace rca
