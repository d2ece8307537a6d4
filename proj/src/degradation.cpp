#include "rca/degradation.hpp"
#include "rca/linalg.hpp"

#include <cmath>
#include <numbers>

namespace rca {

namespace {

double sinc(double x)
{
  if (std::abs(x) < 1e-12) { return 1.0; }
  double const px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double lanczos3(double x)
{
  if (std::abs(x) >= 3.0) { return 0.0; }
  if (x == std::round(x)) { return x == 0.0 ? 1.0 : 0.0; }
  return sinc(x) * sinc(x / 3.0);
}

Eigen::SparseMatrix<double> kron_sparse(Matrix const &R, Matrix const &C)
{
  // Row-major vectorization: pixel (i, j) -> i * cols + j, so M = R (x) C.
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index a = 0; a < R.rows(); ++a) {
    for (Eigen::Index b = 0; b < R.cols(); ++b) {
      double const r = R(a, b);
      if (r == 0.0) { continue; }
      for (Eigen::Index c = 0; c < C.rows(); ++c) {
        for (Eigen::Index d = 0; d < C.cols(); ++d) {
          double const v = C(c, d);
          if (v == 0.0) { continue; }
          trips.emplace_back(a * C.rows() + c, b * C.cols() + d, r * v);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> M(R.rows() * C.rows(), R.cols() * C.cols());
  M.setFromTriplets(trips.begin(), trips.end());
  M.makeCompressed();
  return M;
}

} // namespace

Matrix lanczos_shift_matrix(int n, double delta)
{
  if (!std::isfinite(delta)) { throw DataError("non-finite shift"); }
  // Taps w(m - delta) over all integers m; the same set appears on every row.
  double norm = 0.0;
  int const lo = static_cast<int>(std::floor(delta)) - 3;
  for (int m = lo; m <= lo + 7; ++m) { norm += lanczos3(m - delta); }

  Matrix T = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double const w = lanczos3(i - j - delta);
      if (w != 0.0) { T(i, j) = w / norm; }
    }
  }
  return T;
}

Matrix block_sum_matrix(int n, int m_d)
{
  if (m_d < 1) { throw DataError("downsampling factor must be >= 1"); }
  if (n % m_d != 0) { throw DataError("image size not divisible by downsampling factor"); }
  Matrix D = Matrix::Zero(n / m_d, n);
  for (int i = 0; i < n; ++i) { D(i / m_d, i) = 1.0; }
  return D;
}

DegradationOp DegradationOp::identity(Shape shape, int p)
{
  DegradationOp op;
  op.kind_ = DegradationKind::Identity;
  op.m_d_ = 1;
  op.p_ = p;
  op.hr_ = shape;
  op.lr_ = shape;
  op.shifts_.assign(static_cast<std::size_t>(p), Shift{});
  return op;
}

DegradationOp build_operator(std::vector<Shift> const &shifts, int m_d, Shape hr_shape, bool materialize)
{
  if (m_d < 1) { throw DataError("downsampling factor must be >= 1"); }
  if (hr_shape.rows % m_d != 0 || hr_shape.cols % m_d != 0) {
    throw DataError("high-resolution shape not divisible by downsampling factor");
  }
  DegradationOp op;
  op.kind_ = DegradationKind::ShiftDownsample;
  op.m_d_ = m_d;
  op.p_ = static_cast<int>(shifts.size());
  op.hr_ = hr_shape;
  op.lr_ = {hr_shape.rows / m_d, hr_shape.cols / m_d};
  op.shifts_ = shifts;

  Matrix const Dr = block_sum_matrix(hr_shape.rows, m_d);
  Matrix const Dc = block_sum_matrix(hr_shape.cols, m_d);
  bool const keep = materialize && hr_shape.size() <= DegradationOp::materialize_limit;
  for (auto const &s : shifts) {
    op.rows_.push_back(Dr * lanczos_shift_matrix(hr_shape.rows, s.row));
    op.cols_.push_back(Dc * lanczos_shift_matrix(hr_shape.cols, s.col));
    if (keep) {
      op.dense_.push_back(kron_sparse(op.rows_.back(), op.cols_.back()));
      op.squared_.push_back(op.dense_.back().cwiseProduct(op.dense_.back()));
    }
  }
  return op;
}

Eigen::SparseMatrix<double> DegradationOp::explicit_matrix(int k) const
{
  if (kind_ == DegradationKind::Identity) {
    Eigen::SparseMatrix<double> I(hr_.size(), hr_.size());
    I.setIdentity();
    return I;
  }
  if (materialized()) { return dense_[k]; }
  return kron_sparse(rows_[k], cols_[k]);
}

Matrix DegradationOp::run(Matrix const &in, Mode mode, bool allow_sparse) const
{
  bool const forward = mode == Mode::Plain || mode == Mode::Squared;
  Shape const from = forward ? hr_ : lr_;
  Shape const to = forward ? lr_ : hr_;
  if (in.rows() != from.size() || in.cols() != p_) {
    throw DataError("degradation operator: input is " + std::to_string(in.rows()) + "x" + std::to_string(in.cols()) +
                    ", expected " + std::to_string(from.size()) + "x" + std::to_string(p_));
  }
  if (kind_ == DegradationKind::Identity) { return in; }

  Matrix out(to.size(), p_);
  bool const squared = mode == Mode::Squared || mode == Mode::SquaredAdjoint;
  for (int k = 0; k < p_; ++k) {
    if (allow_sparse && materialized()) {
      auto const &M = squared ? squared_[k] : dense_[k];
      if (forward) {
        out.col(k) = M * in.col(k);
      } else {
        out.col(k) = M.transpose() * in.col(k);
      }
      continue;
    }
    Matrix R = rows_[k];
    Matrix C = cols_[k];
    if (squared) {
      R = R.cwiseAbs2();
      C = C.cwiseAbs2();
    }
    auto const img = image_view(in, k, from);
    auto dst = image_view(out, k, to);
    if (forward) {
      dst = R * img * C.transpose();
    } else {
      dst = R.transpose() * img * C;
    }
  }
  return out;
}

Matrix DegradationOp::apply(Matrix const &X) const { return run(X, Mode::Plain, true); }
Matrix DegradationOp::apply_adjoint(Matrix const &Y) const { return run(Y, Mode::Adjoint, true); }
Matrix DegradationOp::apply_squared(Matrix const &X) const { return run(X, Mode::Squared, true); }
Matrix DegradationOp::apply_squared_adjoint(Matrix const &Y) const { return run(Y, Mode::SquaredAdjoint, true); }
Matrix DegradationOp::apply_matrix_free(Matrix const &X) const { return run(X, Mode::Plain, false); }
Matrix DegradationOp::apply_adjoint_matrix_free(Matrix const &Y) const { return run(Y, Mode::Adjoint, false); }

std::vector<Shift> estimate_shifts(ObservationStack const &stack, int m_d, double detection_kappa)
{
  if (m_d < 1) { throw DataError("downsampling factor must be >= 1"); }
  Shape const s = stack.patch_shape;
  double const floor = stack.noise_sigma > 0.0 ? detection_kappa * stack.noise_sigma : -1.0;
  double const rc = 0.5 * (s.rows - 1);
  double const cc = 0.5 * (s.cols - 1);

  std::vector<Shift> shifts;
  shifts.reserve(static_cast<std::size_t>(stack.count()));
  for (int k = 0; k < stack.count(); ++k) {
    auto const img = image_view(stack.Y, k, s);
    double flux = 0.0;
    double mr = 0.0;
    double mc = 0.0;
    for (int i = 0; i < s.rows; ++i) {
      for (int j = 0; j < s.cols; ++j) {
        double const v = img(i, j);
        if (floor >= 0.0 && v <= floor) { continue; }
        flux += v;
        mr += i * v;
        mc += j * v;
      }
    }
    if (!(flux > 0.0)) { throw DataError("patch " + std::to_string(k) + " has non-positive total flux"); }
    shifts.push_back({(mr / flux - rc) * m_d, (mc / flux - cc) * m_d});
  }
  return shifts;
}

double spectral_norm(DegradationOp const &op, Matrix const &A)
{
  if (A.cols() != op.count()) { throw DataError("weights column count must equal the number of PSFs"); }
  auto normal = [&](Matrix const &X) { return Matrix(op.apply_adjoint(op.apply(X * A)) * A.transpose()); };
  return power_iteration(normal, op.hr_shape().size(), A.rows()).norm;
}

double tight_frame_ratio(DegradationOp const &op, Matrix const &Y)
{
  double const yy = dot(Y, Y);
  if (yy == 0.0) { throw DataError("tight_frame_ratio needs a nonzero probe"); }
  return dot(op.apply(op.apply_adjoint(Y)), Y) / yy;
}

} // namespace rca
