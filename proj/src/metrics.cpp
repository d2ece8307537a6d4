#include "rca/metrics.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <ostream>

namespace rca {

std::pair<double, double> centroid(ImageRef image)
{
  RowMajorMatrix const pos = image.cwiseMax(0.0);
  double const flux = pos.sum();
  if (!(flux > 0.0)) { throw DataError("centroid undefined: no positive flux"); }
  double ri = 0.0;
  double cj = 0.0;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    for (Eigen::Index j = 0; j < pos.cols(); ++j) {
      ri += static_cast<double>(i) * pos(i, j);
      cj += static_cast<double>(j) * pos(i, j);
    }
  }
  return {ri / flux, cj / flux};
}

namespace {

double moment_about(ImageRef image, double ic, double jc, int p, int q)
{
  double m = 0.0;
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    double const di = std::pow(static_cast<double>(i) - ic, p);
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      m += di * std::pow(static_cast<double>(j) - jc, q) * image(i, j);
    }
  }
  return m;
}

} // namespace

double central_moment(ImageRef image, int p, int q)
{
  if (p < 0 || q < 0) { throw DataError("moment orders must be >= 0"); }
  auto const [ic, jc] = centroid(image);
  return moment_about(image, ic, jc, p, q);
}

PsfShape measure_shape(ImageRef image)
{
  PsfShape s;
  std::tie(s.row_c, s.col_c) = centroid(image);
  double const m20 = moment_about(image, s.row_c, s.col_c, 2, 0);
  double const m02 = moment_about(image, s.row_c, s.col_c, 0, 2);
  double const m11 = moment_about(image, s.row_c, s.col_c, 1, 1);
  double const denom = m20 + m02;
  if (denom == 0.0) { throw DataError("ellipticity undefined: zero second moments"); }
  s.e1 = (m20 - m02) / denom;
  s.e2 = 2.0 * m11 / denom;
  double const flux = image.sum();
  s.size = std::sqrt(std::max(denom / flux, 0.0));
  return s;
}

std::pair<double, double> ellipticity(ImageRef image)
{
  PsfShape const s = measure_shape(image);
  return {s.e1, s.e2};
}

double psf_size(ImageRef image)
{
  auto const [ic, jc] = centroid(image);
  double const spread = moment_about(image, ic, jc, 2, 0) + moment_about(image, ic, jc, 0, 2);
  return std::sqrt(std::max(spread / image.sum(), 0.0));
}

double nuclear_norm(Matrix const &M) { return Eigen::JacobiSVD<Matrix>(M).singularValues().sum(); }

ShapeReport field_errors(PsfMatrix const &truth, PsfMatrix const &estimate)
{
  if (truth.hr_shape != estimate.hr_shape || truth.X.rows() != estimate.X.rows()) {
    throw DataError("truth and estimate have different image shapes");
  }
  if (truth.count() != estimate.count()) { throw DataError("truth and estimate have different PSF counts"); }
  int const p = truth.count();
  if (p == 0) { throw DataError("empty field"); }
  ShapeReport rep;
  Matrix gamma(2, p);
  Vector dsize(p);
  for (int k = 0; k < p; ++k) {
    rep.truth.push_back(measure_shape(image_view(truth.X, k, truth.hr_shape)));
    rep.estimate.push_back(measure_shape(image_view(estimate.X, k, estimate.hr_shape)));
    gamma(0, k) = rep.truth[k].e1 - rep.estimate[k].e1;
    gamma(1, k) = rep.truth[k].e2 - rep.estimate[k].e2;
    dsize[k] = std::abs(rep.truth[k].size - rep.estimate[k].size);
    double const err = (truth.X.col(k) - estimate.X.col(k)).squaredNorm();
    rep.sq_error.push_back(err);
    double const ref = truth.X.col(k).squaredNorm();
    rep.nmse += ref > 0.0 ? err / ref : (err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  }
  rep.E_gamma = gamma.colwise().norm().sum() / p;
  rep.B_gamma = nuclear_norm(gamma);
  rep.E_S = dsize.mean();
  rep.sigma_S = std::sqrt((dsize.array() - rep.E_S).square().mean());
  rep.mse = (truth.X - estimate.X).squaredNorm() / static_cast<double>(truth.X.size());
  rep.nmse /= p;
  return rep;
}

void write_shape_report_csv(ShapeReport const &rep, std::ostream &out)
{
  out.precision(12);
  out << "psf,e1_true,e2_true,size_true,e1_est,e2_est,size_est,gamma_error,size_error,sq_error,"
         "E_gamma,B_gamma,E_S,sigma_S,MSE,NMSE\n";
  for (std::size_t k = 0; k < rep.truth.size(); ++k) {
    auto const &t = rep.truth[k];
    auto const &e = rep.estimate[k];
    out << k << ',' << t.e1 << ',' << t.e2 << ',' << t.size << ',' << e.e1 << ',' << e.e2 << ',' << e.size << ','
        << std::hypot(t.e1 - e.e1, t.e2 - e.e2) << ',' << std::abs(t.size - e.size) << ',' << rep.sq_error[k]
        << ",,,,,,\n";
  }
  out << "all,,,,,,,,,," << rep.E_gamma << ',' << rep.B_gamma << ',' << rep.E_S << ',' << rep.sigma_S << ','
      << rep.mse << ',' << rep.nmse << '\n';
}

double snr(Vector const &signal, double noise_sigma, int N)
{
  if (N <= 0) { throw DataError("SNR needs N > 0"); }
  if (noise_sigma < 0.0) { throw DataError("noise level must be >= 0"); }
  if (std::isinf(noise_sigma)) { return 0.0; }
  return signal.squaredNorm() / (N * noise_sigma * noise_sigma);
}

double noise_for_snr(Vector const &signal, double target_snr, int N)
{
  if (!(target_snr > 0.0)) { throw DataError("target SNR must be positive"); }
  if (N <= 0) { throw DataError("SNR needs N > 0"); }
  return signal.norm() / std::sqrt(N * target_snr);
}

} // namespace rca
