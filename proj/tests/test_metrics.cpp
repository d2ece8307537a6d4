#include <doctest.h>

#include "rca/metrics.hpp"

#include <Eigen/SVD>

#include <random>
#include <sstream>

using namespace rca;

namespace {

std::mt19937_64 rng(19);

RowMajorMatrix random_image(int rows, int cols)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMajorMatrix img(rows, cols);
  for (Eigen::Index i = 0; i < img.size(); ++i) { img.data()[i] = u(rng); }
  return img;
}

RowMajorMatrix gaussian(int n, double sr, double sc, double rho = 0.0)
{
  RowMajorMatrix img(n, n);
  double const c = 0.5 * (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double const a = (i - c) / sr;
      double const b = (j - c) / sc;
      img(i, j) = std::exp(-0.5 * (a * a + b * b - 2.0 * rho * a * b) / (1.0 - rho * rho));
    }
  }
  return img;
}

} // namespace

TEST_CASE("two-pixel image")
{
  RowMajorMatrix img = RowMajorMatrix::Zero(3, 3);
  img(0, 0) = 1.0;
  img(0, 2) = 1.0;
  auto const [rc, cc] = centroid(img);
  CHECK(rc == 0.0);
  CHECK(cc == 1.0);
  CHECK(central_moment(img, 0, 2) == doctest::Approx(2.0));
  CHECK(central_moment(img, 2, 0) == 0.0);
  auto const [e1, e2] = ellipticity(img);
  CHECK(e1 == doctest::Approx(-1.0));
  CHECK(e2 == doctest::Approx(0.0));
  CHECK(psf_size(img) == doctest::Approx(1.0));
}

TEST_CASE("45-degree pair")
{
  RowMajorMatrix img = RowMajorMatrix::Zero(3, 3);
  img(0, 0) = 1.0;
  img(2, 2) = 1.0;
  auto const [e1, e2] = ellipticity(img);
  CHECK(e1 == doctest::Approx(0.0));
  CHECK(e2 == doctest::Approx(1.0));
}

TEST_CASE("single pixel and degenerate images")
{
  RowMajorMatrix img = RowMajorMatrix::Zero(4, 4);
  img(1, 2) = 3.0;
  CHECK(psf_size(img) == 0.0);
  CHECK_THROWS_AS(ellipticity(img), DataError);
  CHECK_THROWS_AS(centroid(RowMajorMatrix::Zero(3, 3)), DataError);
  CHECK_THROWS_AS(centroid(-RowMajorMatrix::Ones(3, 3)), DataError);
}

TEST_CASE("central first moments vanish on nonnegative images")
{
  for (int trial = 0; trial < 20; ++trial) {
    auto const img = random_image(9, 7);
    CHECK(std::abs(central_moment(img, 1, 0)) < 1e-11);
    CHECK(std::abs(central_moment(img, 0, 1)) < 1e-11);
  }
}

TEST_CASE("symmetric Gaussians")
{
  auto const iso = gaussian(21, 2.5, 2.5);
  auto const [e1, e2] = ellipticity(iso);
  CHECK(std::abs(e1) < 1e-10);
  CHECK(std::abs(e2) < 1e-10);
  CHECK(std::abs(central_moment(gaussian(21, 2.0, 3.0), 1, 1)) < 1e-10);
  // Elongated along columns: mu02 > mu20, so e1 < 0.
  CHECK(ellipticity(gaussian(21, 1.5, 3.0)).first < -0.3);
  CHECK(ellipticity(gaussian(21, 2.0, 2.0, 0.5)).second > 0.3);
}

TEST_CASE("invariance under intensity scaling and sign flip under 90-degree rotation")
{
  for (int trial = 0; trial < 50; ++trial) {
    auto const img = random_image(8, 8);
    double const c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    RowMajorMatrix const scaled = c * img;
    auto const a = measure_shape(img);
    auto const b = measure_shape(scaled);
    CHECK(b.e1 == doctest::Approx(a.e1).epsilon(1e-12));
    CHECK(b.e2 == doctest::Approx(a.e2).epsilon(1e-12));
    CHECK(b.size == doctest::Approx(a.size).epsilon(1e-12));

    RowMajorMatrix rotated(8, 8);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) { rotated(j, 7 - i) = img(i, j); }
    }
    auto const rot = measure_shape(rotated);
    CHECK(rot.e1 == doctest::Approx(-a.e1).epsilon(1e-10));
    CHECK(rot.e2 == doctest::Approx(-a.e2).epsilon(1e-10));
    CHECK(rot.size == doctest::Approx(a.size).epsilon(1e-12));
    CHECK(std::abs(a.e1) <= 1.0);
    CHECK(std::abs(a.e2) <= 1.0);
  }
}

TEST_CASE("nuclear norm")
{
  CHECK(nuclear_norm(Matrix::Identity(2, 2)) == doctest::Approx(2.0));
  for (int trial = 0; trial < 20; ++trial) {
    Matrix const G = Matrix::Random(2, 15);
    double const oracle = Eigen::BDCSVD<Matrix>(G).singularValues().sum();
    CHECK(nuclear_norm(G) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(nuclear_norm(G) >= G.norm() / std::sqrt(2.0) - 1e-12);
    CHECK(nuclear_norm(G) <= std::sqrt(2.0) * G.norm() + 1e-12);
  }
}

TEST_CASE("field errors")
{
  Shape const sh{7, 7};
  Matrix X(49, 5);
  for (int k = 0; k < 5; ++k) { X.col(k) = random_image(7, 7).reshaped<Eigen::RowMajor>(); }
  PsfMatrix const truth{X, sh};

  SUBCASE("estimate equal to truth")
  {
    auto const rep = field_errors(truth, truth);
    CHECK(rep.E_gamma == 0.0);
    CHECK(rep.B_gamma == 0.0);
    CHECK(rep.E_S == 0.0);
    CHECK(rep.sigma_S == 0.0);
    CHECK(rep.mse == 0.0);
    CHECK(rep.nmse == 0.0);
  }
  SUBCASE("aggregates follow their definitions")
  {
    Matrix Xh = X;
    Xh.col(0) = random_image(7, 7).reshaped<Eigen::RowMajor>();
    Xh.col(3) *= 2.0;
    Xh(10, 4) += 0.5;
    auto const rep = field_errors(truth, {Xh, sh});
    Matrix G(2, 5);
    std::vector<double> ds;
    double eg = 0.0;
    double nmse = 0.0;
    for (int k = 0; k < 5; ++k) {
      auto const a = measure_shape(image_view(X, k, sh));
      auto const b = measure_shape(image_view(Xh, k, sh));
      G(0, k) = a.e1 - b.e1;
      G(1, k) = a.e2 - b.e2;
      eg += G.col(k).norm() / 5.0;
      ds.push_back(std::abs(a.size - b.size));
      nmse += (X.col(k) - Xh.col(k)).squaredNorm() / X.col(k).squaredNorm() / 5.0;
    }
    double const es = (ds[0] + ds[1] + ds[2] + ds[3] + ds[4]) / 5.0;
    double var = 0.0;
    for (double d : ds) { var += (d - es) * (d - es) / 5.0; }
    CHECK(rep.E_gamma == doctest::Approx(eg));
    CHECK(rep.B_gamma == doctest::Approx(Eigen::JacobiSVD<Matrix>(G).singularValues().sum()));
    CHECK(rep.E_S == doctest::Approx(es));
    CHECK(rep.sigma_S == doctest::Approx(std::sqrt(var)));
    CHECK(rep.mse == doctest::Approx((X - Xh).squaredNorm() / (49.0 * 5.0)));
    CHECK(rep.nmse == doctest::Approx(nmse));
    CHECK(rep.sq_error[3] == doctest::Approx(X.col(3).squaredNorm()));
  }
  SUBCASE("mismatched fields are rejected")
  {
    CHECK_THROWS_AS(field_errors(truth, {X.leftCols(4), sh}), DataError);
    CHECK_THROWS_AS(field_errors(truth, {X, {49, 1}}), DataError);
  }
  SUBCASE("CSV has one row per PSF plus an aggregate row")
  {
    std::ostringstream out;
    write_shape_report_csv(field_errors(truth, truth), out);
    std::istringstream in(out.str());
    std::string line;
    int rows = 0;
    std::string last;
    std::getline(in, line);
    while (std::getline(in, line)) {
      ++rows;
      last = line;
    }
    CHECK(rows == 6);
    CHECK(last.rfind("all,", 0) == 0);
  }
}

TEST_CASE("SNR")
{
  Vector const s = Vector::Constant(100, 1.0);
  CHECK(snr(s, 0.1, 100) == doctest::Approx(100.0));
  CHECK(snr(s, std::numeric_limits<double>::infinity(), 100) == 0.0);
  CHECK(snr(2.0 * s, 0.1, 100) == doctest::Approx(400.0));

  Vector const unit = Vector::Unit(1024, 3);
  CHECK(noise_for_snr(unit, 40.0, 1024) == doctest::Approx(1.0 / std::sqrt(1024.0 * 40.0)));
  for (double target : {0.5, 10.0, 40.0, 1000.0}) {
    Vector const sig = Vector::Random(64);
    double const sigma = noise_for_snr(sig, target, 64);
    CHECK(std::abs(snr(sig, sigma, 64) - target) <= 1e-12 * target);
  }
  CHECK_THROWS_AS(noise_for_snr(unit, 0.0, 1024), DataError);
  CHECK_THROWS_AS(noise_for_snr(unit, -1.0, 1024), DataError);
}
