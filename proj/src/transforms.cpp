#include "rca/transforms.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rca {

namespace {

constexpr std::array<double, 5> kB3 = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect(int i, int n)
{
  if (i < 0) { return -i; }
  if (i >= n) { return 2 * (n - 1) - i; }
  return i;
}

} // namespace

Matrix b3_smoothing_matrix(int n, int step)
{
  if (2 * step > n - 1) { throw DataError("starlet scale too large for image size"); }
  Matrix H = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int t = -2; t <= 2; ++t) { H(i, reflect(i + t * step, n)) += kB3[static_cast<std::size_t>(t + 2)]; }
  }
  return H;
}

int default_starlet_scales(Shape shape)
{
  int const m = std::min(shape.rows, shape.cols);
  int const j = static_cast<int>(std::floor(std::log2(static_cast<double>(m)))) - 2;
  return std::max(j, 2);
}

SparsityDictionary::AxisOps SparsityDictionary::axis_ops(int n, int n_scales)
{
  AxisOps ops;
  Matrix K = Matrix::Identity(n, n);
  for (int j = 1; j <= n_scales; ++j) {
    Matrix const H = b3_smoothing_matrix(n, 1 << (j - 1));
    ops.smooth.push_back(K);
    K = H * K;
    ops.detail.push_back(H * K);
  }
  return ops;
}

SparsityDictionary SparsityDictionary::identity(Shape shape)
{
  SparsityDictionary d;
  d.kind_ = DictionaryKind::Identity;
  d.shape_ = shape;
  return d;
}

SparsityDictionary SparsityDictionary::starlet(Shape shape, int n_scales)
{
  if (n_scales <= 0) { n_scales = default_starlet_scales(shape); }
  int const m = std::min(shape.rows, shape.cols);
  if ((1 << n_scales) > m - 1) {
    throw DataError("starlet with " + std::to_string(n_scales) + " scales does not fit a " + std::to_string(shape.rows) +
                    "x" + std::to_string(shape.cols) + " image");
  }
  SparsityDictionary d;
  d.kind_ = DictionaryKind::Starlet2;
  d.shape_ = shape;
  d.n_scales_ = n_scales;
  d.rows_ = axis_ops(shape.rows, n_scales);
  d.cols_ = axis_ops(shape.cols, n_scales);
  return d;
}

int SparsityDictionary::coefficient_count() const
{
  return kind_ == DictionaryKind::Identity ? shape_.size() : n_scales_ * shape_.size();
}

void SparsityDictionary::run(double const *in, double *out, Mode mode) const
{
  int const n = shape_.size();
  using Map = Eigen::Map<RowMajorMatrix>;
  using CMap = Eigen::Map<RowMajorMatrix const>;
  if (mode == Mode::Adjoint) {
    Map img(out, shape_.rows, shape_.cols);
    img.setZero();
    for (int j = 0; j < n_scales_; ++j) {
      CMap band(in + static_cast<std::ptrdiff_t>(j) * n, shape_.rows, shape_.cols);
      auto const &A = rows_.smooth[j];
      auto const &B = rows_.detail[j];
      auto const &Ac = cols_.smooth[j];
      auto const &Bc = cols_.detail[j];
      img.noalias() += A.transpose() * band * Ac;
      img.noalias() -= B.transpose() * band * Bc;
    }
    return;
  }
  CMap img(in, shape_.rows, shape_.cols);
  for (int j = 0; j < n_scales_; ++j) {
    Map band(out + static_cast<std::ptrdiff_t>(j) * n, shape_.rows, shape_.cols);
    auto const &A = rows_.smooth[j];
    auto const &B = rows_.detail[j];
    auto const &Ac = cols_.smooth[j];
    auto const &Bc = cols_.detail[j];
    if (mode == Mode::Forward) {
      band.noalias() = A * img * Ac.transpose();
      band.noalias() -= B * img * Bc.transpose();
    } else {
      // (A(x)A' - B(x)B') squared entrywise = A^2(x)A'^2 - 2 AB(x)A'B' + B^2(x)B'^2
      band.noalias() = A.cwiseAbs2() * img * Ac.cwiseAbs2().transpose();
      band.noalias() -= 2.0 * A.cwiseProduct(B) * img * Ac.cwiseProduct(Bc).transpose();
      band.noalias() += B.cwiseAbs2() * img * Bc.cwiseAbs2().transpose();
    }
  }
}

Vector SparsityDictionary::forward(Vector const &image) const
{
  if (image.size() != shape_.size()) { throw DataError("dictionary: image size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return image; }
  Vector out(coefficient_count());
  run(image.data(), out.data(), Mode::Forward);
  return out;
}

Vector SparsityDictionary::adjoint(Vector const &coefficients) const
{
  if (coefficients.size() != coefficient_count()) { throw DataError("dictionary: coefficient size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return coefficients; }
  Vector out(shape_.size());
  run(coefficients.data(), out.data(), Mode::Adjoint);
  return out;
}

Vector SparsityDictionary::forward_squared(Vector const &image) const
{
  if (image.size() != shape_.size()) { throw DataError("dictionary: image size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return image; }
  Vector out(coefficient_count());
  run(image.data(), out.data(), Mode::Squared);
  return out;
}

Vector SparsityDictionary::row_squared_sums() const { return forward_squared(Vector(Vector::Ones(shape_.size()))); }

Matrix SparsityDictionary::forward(Matrix const &images) const
{
  if (images.rows() != shape_.size()) { throw DataError("dictionary: image size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return images; }
  Matrix out(coefficient_count(), images.cols());
  for (Eigen::Index k = 0; k < images.cols(); ++k) { run(images.col(k).data(), out.col(k).data(), Mode::Forward); }
  return out;
}

Matrix SparsityDictionary::adjoint(Matrix const &coefficients) const
{
  if (coefficients.rows() != coefficient_count()) { throw DataError("dictionary: coefficient size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return coefficients; }
  Matrix out(shape_.size(), coefficients.cols());
  for (Eigen::Index k = 0; k < coefficients.cols(); ++k) {
    run(coefficients.col(k).data(), out.col(k).data(), Mode::Adjoint);
  }
  return out;
}

Matrix SparsityDictionary::forward_squared(Matrix const &images) const
{
  if (images.rows() != shape_.size()) { throw DataError("dictionary: image size mismatch"); }
  if (kind_ == DictionaryKind::Identity) { return images; }
  Matrix out(coefficient_count(), images.cols());
  for (Eigen::Index k = 0; k < images.cols(); ++k) { run(images.col(k).data(), out.col(k).data(), Mode::Squared); }
  return out;
}

} // namespace rca
