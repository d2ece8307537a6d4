#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace rca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Malformed or inconsistent input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside an iterative scheme (non-finite iterate, collapsed model, bad step sizes).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape {
  int rows = 0;
  int cols = 0;

  int size() const { return rows * cols; }
  bool operator==(Shape const &) const = default;
};

/// Field-of-view coordinates of one star.
struct Position {
  double x = 0.0;
  double y = 0.0;

  bool operator==(Position const &) const = default;
};

double distance(Position const &a, Position const &b);

/// Throws DataError if any two positions are closer than 1e-9 times the field diameter, or any is non-finite.
void check_distinct(std::vector<Position> const &positions);

/// Observed star patches. Each column of Y is one patch, vectorized row-major.
struct ObservationStack {
  Matrix Y;
  std::vector<Position> positions;
  Shape patch_shape;
  double noise_sigma = 0.0;

  int n_pixels() const { return static_cast<int>(Y.rows()); }
  int count() const { return static_cast<int>(Y.cols()); }

  /// Checks column/position counts, patch shape and finiteness.
  void validate() const;
};

struct PsfMatrix {
  Matrix X;
  Shape hr_shape;

  int count() const { return static_cast<int>(X.cols()); }
};

/// X = S A with A = alpha V^T.
struct Factorization {
  Matrix S;     // n_x x r eigen-PSFs
  Matrix alpha; // r x N sparse code
  Matrix V;     // p x N harmonic dictionary
  Matrix A;     // r x p weights

  int rank() const { return static_cast<int>(S.cols()); }
};

/// View column k of a vectorized-image matrix as a rows x cols row-major image.
inline Eigen::Map<RowMajorMatrix> image_view(Matrix &M, Eigen::Index k, Shape s)
{
  return Eigen::Map<RowMajorMatrix>(M.col(k).data(), s.rows, s.cols);
}
inline Eigen::Map<RowMajorMatrix const> image_view(Matrix const &M, Eigen::Index k, Shape s)
{
  return Eigen::Map<RowMajorMatrix const>(M.col(k).data(), s.rows, s.cols);
}

/// S * (alpha * V^T). Entries may be slightly negative.
PsfMatrix reconstruct(Factorization const &f, Shape hr_shape);

/// A = alpha V^T for the stored alpha and V.
Matrix weights_from_code(Matrix const &alpha, Matrix const &V);

/// Scale each row of A (and the matching row of alpha) to unit l2 norm. Zero rows are left untouched.
void normalize_rows(Matrix &A, Matrix &alpha);

// Dataset file: one JSON header line, '\n', then little-endian float64 pixels,
// patch after patch, row-major within a patch.
ObservationStack load_dataset(std::filesystem::path const &path);
void save_dataset(ObservationStack const &stack, std::filesystem::path const &path);

} // namespace rca
