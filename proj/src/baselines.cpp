#include "rca/baselines.hpp"
#include "rca/linalg.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace rca {

PcaDenoiser::PcaDenoiser(Matrix const &Y)
{
  mean_ = Y.rowwise().mean();
  Matrix const centred = Y.colwise() - mean_;
  Eigen::BDCSVD<Matrix> svd(centred, Eigen::ComputeThinU);
  U_ = svd.matrixU();
  singular_values_ = svd.singularValues();
  coeffs_ = U_.transpose() * centred;
}

Matrix PcaDenoiser::reconstruct(int r) const
{
  if (r < 0) { throw DataError("pca: negative rank"); }
  auto const k = std::min<Eigen::Index>(r, U_.cols());
  Matrix out = U_.leftCols(k) * coeffs_.topRows(k);
  out.colwise() += mean_;
  return out;
}

PsfMatrix pca_denoise(Matrix const &Y, int r, Shape shape)
{
  if (Y.rows() != shape.size()) { throw DataError("pca: patch shape does not match the data"); }
  return {PcaDenoiser(Y).reconstruct(r), shape};
}

Matrix monomial_weights(std::vector<Position> const &positions, int degree)
{
  if (degree < 0) { throw DataError("monomial degree must be >= 0"); }
  if (positions.empty()) { throw DataError("no positions"); }
  auto const p = static_cast<Eigen::Index>(positions.size());
  double xmin = positions[0].x, xmax = xmin, ymin = positions[0].y, ymax = ymin;
  for (auto const &u : positions) {
    xmin = std::min(xmin, u.x);
    xmax = std::max(xmax, u.x);
    ymin = std::min(ymin, u.y);
    ymax = std::max(ymax, u.y);
  }
  auto const rescale = [](double v, double lo, double hi) { return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0; };

  Matrix A((degree + 1) * (degree + 2) / 2, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    double const x = p == 1 ? positions[0].x : rescale(positions[k].x, xmin, xmax);
    double const y = p == 1 ? positions[0].y : rescale(positions[k].y, ymin, ymax);
    Eigen::Index row = 0;
    for (int d = 0; d <= degree; ++d) {
      for (int b = 0; b <= d; ++b) { A(row++, k) = std::pow(x, d - b) * std::pow(y, b); }
    }
  }
  return A;
}

PolynomialFit polynomial_field_fit(Matrix const &Y, DegradationOp const &op, std::vector<Position> const &positions,
                                   int degree, double ridge_lambda, double cg_tol, int max_iters)
{
  if (ridge_lambda < 0.0) { throw DataError("ridge parameter must be >= 0"); }
  if (Y.cols() != op.count() || Y.rows() != op.lr_shape().size()) { throw DataError("polynomial fit: shape mismatch"); }
  PolynomialFit fit;
  fit.A = monomial_weights(positions, degree);
  if (ridge_lambda == 0.0) {
    Eigen::FullPivLU<Matrix> lu(fit.A * fit.A.transpose());
    if (lu.rank() < fit.A.rows()) { throw DataError("monomial matrix is rank deficient; use a positive ridge"); }
  }

  Shape const hr = op.hr_shape();
  Shape const lr = op.lr_shape();
  int const m = op.factor();
  Vector const mean = Y.rowwise().mean();
  fit.S0 = Matrix::Zero(hr.size(), fit.A.rows());
  for (int i = 0; i < hr.rows; ++i) {
    for (int j = 0; j < hr.cols; ++j) {
      fit.S0(i * hr.cols + j, 0) = mean((i / m) * lr.cols + j / m) / (m * m);
    }
  }

  Matrix const &A = fit.A;
  Matrix const At = A.transpose();
  auto const normal = [&](Matrix const &D) {
    Matrix out = op.apply_adjoint(op.apply(D * A)) * At;
    out += 2.0 * ridge_lambda * D;
    return out;
  };
  Matrix const base_resid = Y - op.apply(fit.S0 * A);
  fit.objective_at_zero = 0.5 * base_resid.squaredNorm();

  Matrix const b = op.apply_adjoint(base_resid) * At;
  Matrix D = Matrix::Zero(fit.S0.rows(), fit.S0.cols());
  Matrix r = b;
  Matrix d = r;
  double rr = r.squaredNorm();
  double const stop = cg_tol * cg_tol * std::max(b.squaredNorm(), 1e-300);
  int it = 0;
  for (; it < max_iters && rr > stop; ++it) {
    Matrix const q = normal(d);
    double const dq = dot(d, q);
    if (!(dq > 0.0)) { break; }
    double const step = rr / dq;
    D += step * d;
    r -= step * q;
    double const rr_next = r.squaredNorm();
    d = r + (rr_next / rr) * d;
    rr = rr_next;
  }
  if (!D.allFinite()) { throw SolverError("polynomial fit diverged"); }
  fit.cg_iterations = it;
  fit.delta_S = std::move(D);
  Matrix const S = fit.S0 + fit.delta_S;
  fit.X = {S * A, hr};
  fit.objective = 0.5 * (Y - op.apply(fit.X.X)).squaredNorm() + ridge_lambda * fit.delta_S.squaredNorm();
  return fit;
}

Matrix rca_lsq_weights(Matrix const &Y, DegradationOp const &op, Matrix const &S)
{
  auto const r = S.cols();
  auto const p = op.count();
  if (Y.cols() != p || S.rows() != op.hr_shape().size()) { throw DataError("least-squares weights: shape mismatch"); }
  // FS[i] holds M_k s_i in column k.
  std::vector<Matrix> FS;
  FS.reserve(static_cast<std::size_t>(r));
  for (Eigen::Index i = 0; i < r; ++i) { FS.push_back(op.apply(S.col(i).replicate(1, p))); }

  Matrix A(r, p);
  Matrix G(r, r);
  Vector rhs(r);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index i = 0; i < r; ++i) {
      rhs(i) = FS[i].col(k).dot(Y.col(k));
      for (Eigen::Index j = 0; j <= i; ++j) { G(i, j) = G(j, i) = FS[i].col(k).dot(FS[j].col(k)); }
    }
    double const scale = G.diagonal().maxCoeff();
    G.diagonal().array() += 1e-10 * std::max(scale, 1e-300);
    A.col(k) = G.ldlt().solve(rhs);
  }
  return A;
}

} // namespace rca
