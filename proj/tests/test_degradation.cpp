#include <doctest.h>

#include "rca/degradation.hpp"
#include "rca/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>

using namespace rca;

namespace {

std::mt19937_64 rng(42);

Matrix random_matrix(Eigen::Index r, Eigen::Index c)
{
  std::normal_distribution<double> g;
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < M.size(); ++i) { M.data()[i] = g(rng); }
  return M;
}

std::vector<Shift> random_shifts(int p, double amplitude)
{
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<Shift> s(static_cast<std::size_t>(p));
  for (auto &v : s) {
    v.row = u(rng);
    v.col = u(rng);
  }
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Lanczos-3 weight written out from the kernel definition.
double lanczos_weight(double x)
{
  if (std::abs(x) >= 3.0) { return 0.0; }
  if (x == 0.0) { return 1.0; }
  double const px = std::numbers::pi * x;
  return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

} // namespace

TEST_CASE("block sum of a 4x4 all-ones image")
{
  auto const op = build_operator({{0, 0}}, 2, {4, 4});
  Matrix const X = Matrix::Ones(16, 1);
  Matrix const Y = op.apply(X);
  CHECK(Y.rows() == 4);
  CHECK((Y.array() == 4.0).all());
}

TEST_CASE("m_d = 1 without shift is the identity")
{
  auto const op = build_operator({{0, 0}, {0, 0}}, 1, {5, 4});
  Matrix const X = random_matrix(20, 2);
  CHECK((op.apply(X) - X).norm() == 0.0);
  auto const id = DegradationOp::identity({5, 4}, 2);
  CHECK((id.apply(X) - X).norm() == 0.0);
  CHECK((id.apply_adjoint(X) - X).norm() == 0.0);
  CHECK((id.apply_squared(X) - X).norm() == 0.0);
}

TEST_CASE("LR delta maps back to a 2x2 block of ones")
{
  auto const op = build_operator({{0, 0}}, 2, {4, 6});
  Matrix Y = Matrix::Zero(6, 1);
  Y(1 * 3 + 2, 0) = 1.0; // LR pixel (1, 2)
  Matrix const X = op.apply_adjoint(Y);
  auto const img = image_view(X, 0, {4, 6});
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) {
      bool const inside = (i == 2 || i == 3) && (j == 4 || j == 5);
      CHECK(img(i, j) == (inside ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("Lanczos shift matrix")
{
  SUBCASE("zero and integer shifts are exact")
  {
    CHECK((lanczos_shift_matrix(7, 0.0) - Matrix::Identity(7, 7)).norm() == 0.0);
    Matrix const T = lanczos_shift_matrix(7, 1.0);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) { CHECK(T(i, j) == (i == j + 1 ? 1.0 : 0.0)); }
    }
  }
  SUBCASE("fractional taps follow the kernel, normalized to unit sum")
  {
    double const delta = 0.37;
    Matrix const T = lanczos_shift_matrix(15, delta);
    double norm = 0.0;
    for (int m = -3; m <= 4; ++m) { norm += lanczos_weight(m - delta); }
    for (int j = 0; j < 15; ++j) { CHECK(T(7, j) == doctest::Approx(lanczos_weight(7 - j - delta) / norm).epsilon(1e-13)); }
    CHECK(T.row(7).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("adjoint identities hold for random operators")
{
  for (int trial = 0; trial < 100; ++trial) {
    int const m_d = 1 + trial % 3;
    Shape const hr{6 * m_d, 4 * m_d};
    int const p = 3;
    auto const op = build_operator(random_shifts(p, 0.5 * m_d), m_d, hr);
    Matrix const X = random_matrix(hr.size(), p);
    Matrix const Y = random_matrix(op.lr_shape().size(), p);
    CHECK(rel(dot(op.apply(X), Y), dot(X, op.apply_adjoint(Y))) < 1e-10);
    CHECK(rel(dot(op.apply_squared(X), Y), dot(X, op.apply_squared_adjoint(Y))) < 1e-10);
    CHECK(rel(dot(op.apply_matrix_free(X), Y), dot(X, op.apply_adjoint_matrix_free(Y))) < 1e-10);
  }
}

TEST_CASE("explicit and matrix-free paths agree; squared operator matches the dense oracle")
{
  Shape const hr{12, 10};
  auto const op = build_operator(random_shifts(4, 1.0), 2, hr);
  REQUIRE(op.materialized());
  Matrix const X = random_matrix(hr.size(), 4);
  Matrix const Y = random_matrix(op.lr_shape().size(), 4);
  CHECK((op.apply(X) - op.apply_matrix_free(X)).norm() <= 1e-12 * op.apply(X).norm());
  CHECK((op.apply_adjoint(Y) - op.apply_adjoint_matrix_free(Y)).norm() <= 1e-12 * op.apply_adjoint(Y).norm());

  Matrix const F2 = op.apply_squared(X);
  for (int k = 0; k < 4; ++k) {
    Matrix const M = Matrix(op.explicit_matrix(k));
    Matrix const M2 = M.cwiseAbs2();
    CHECK((F2.col(k) - M2 * X.col(k)).norm() <= 1e-12 * F2.col(k).norm());
    CHECK((op.apply(X).col(k) - M * X.col(k)).norm() <= 1e-12 * X.col(k).norm());
  }

  auto const unshifted = build_operator(std::vector<Shift>(4), 2, hr);
  CHECK((unshifted.apply_squared(X) - unshifted.apply(X)).norm() == 0.0);
}

TEST_CASE("large images run matrix-free")
{
  auto const op = build_operator({{0.3, -0.2}}, 2, {80, 80});
  CHECK_FALSE(op.materialized());
  Matrix const X = random_matrix(6400, 1);
  Matrix const Y = random_matrix(1600, 1);
  CHECK(rel(dot(op.apply(X), Y), dot(X, op.apply_adjoint(Y))) < 1e-10);
}

TEST_CASE("linearity and flux preservation")
{
  Shape const hr{8, 8};
  auto const op = build_operator(random_shifts(2, 1.0), 2, hr);
  Matrix const X = random_matrix(64, 2);
  Matrix const Z = random_matrix(64, 2);
  Matrix const lhs = op.apply(2.5 * X - 0.75 * Z);
  Matrix const rhs = 2.5 * op.apply(X) - 0.75 * op.apply(Z);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

  auto const flat = build_operator(std::vector<Shift>(2), 2, hr);
  Matrix const P = random_matrix(64, 2).cwiseAbs();
  Matrix const Q = flat.apply(P);
  for (int k = 0; k < 2; ++k) { CHECK(rel(Q.col(k).sum(), P.col(k).sum()) < 1e-10); }
}

TEST_CASE("tight-frame ratio")
{
  Shape const hr{16, 16};
  auto const flat = build_operator(std::vector<Shift>(3), 2, hr);
  Matrix const Y = random_matrix(64, 3);
  CHECK((flat.apply(flat.apply_adjoint(Y)) - 4.0 * Y).norm() == doctest::Approx(0.0));
  CHECK(tight_frame_ratio(flat, Y) == doctest::Approx(4.0).epsilon(1e-12));
  auto const shifted = build_operator(random_shifts(3, 1.0), 2, hr);
  double const ratio = tight_frame_ratio(shifted, Y);
  MESSAGE("measured tight-frame ratio for shifted operator: " << ratio);
  CHECK(ratio > 2.0);
  CHECK(ratio < 4.5);
}

TEST_CASE("spectral norm")
{
  auto const id = DegradationOp::identity({3, 3}, 4);
  CHECK(spectral_norm(id, Matrix::Identity(4, 4)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(spectral_norm(id, 3.0 * Matrix::Identity(4, 4)) == doctest::Approx(3.0).epsilon(1e-6));

  // Dense matrix of X -> F(X A): entry ((l, k), (i, c)) = M_k[l, i] A[c, k].
  Shape const hr{4, 4};
  int const p = 3;
  int const r = 2;
  auto const op = build_operator(random_shifts(p, 1.0), 2, hr);
  Matrix const A = random_matrix(r, p);
  int const ny = op.lr_shape().size();
  Matrix L = Matrix::Zero(ny * p, hr.size() * r);
  for (int k = 0; k < p; ++k) {
    Matrix const M = Matrix(op.explicit_matrix(k));
    for (int c = 0; c < r; ++c) { L.block(k * ny, c * hr.size(), ny, hr.size()) = A(c, k) * M; }
  }
  double const oracle = Eigen::JacobiSVD<Matrix>(L).singularValues()(0);
  CHECK(spectral_norm(op, A) == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("shift estimation")
{
  SUBCASE("centred symmetric Gaussian")
  {
    ObservationStack s;
    s.patch_shape = {9, 9};
    s.Y = Matrix(81, 1);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < 9; ++j) { s.Y(i * 9 + j, 0) = std::exp(-((i - 4) * (i - 4) + (j - 4) * (j - 4)) / 4.0); }
    }
    s.positions = {{0, 0}};
    auto const sh = estimate_shifts(s, 2);
    CHECK(std::abs(sh[0].row) < 1e-10);
    CHECK(std::abs(sh[0].col) < 1e-10);
  }
  SUBCASE("single pixel off centre, m_d = 2")
  {
    ObservationStack s;
    s.patch_shape = {5, 5};
    s.Y = Matrix::Zero(25, 1);
    s.Y(3 * 5 + 2, 0) = 1.0;
    s.positions = {{0, 0}};
    auto const sh = estimate_shifts(s, 2);
    CHECK(sh[0].row == doctest::Approx(2.0));
    CHECK(sh[0].col == doctest::Approx(0.0));
  }
  SUBCASE("analytically shifted Gaussian")
  {
    ObservationStack s;
    s.patch_shape = {15, 15};
    s.Y = Matrix(225, 1);
    double const dr = 0.3;
    double const dc = -0.2;
    for (int i = 0; i < 15; ++i) {
      for (int j = 0; j < 15; ++j) {
        double const a = i - 7 - dr;
        double const b = j - 7 - dc;
        s.Y(i * 15 + j, 0) = std::exp(-(a * a + b * b) / (2 * 1.5 * 1.5));
      }
    }
    s.positions = {{0, 0}};
    auto const sh = estimate_shifts(s, 2);
    CHECK(std::abs(sh[0].row - 2 * dr) < 0.05);
    CHECK(std::abs(sh[0].col - 2 * dc) < 0.05);
  }
  SUBCASE("non-positive flux is an error")
  {
    ObservationStack s;
    s.patch_shape = {3, 3};
    s.Y = -Matrix::Ones(9, 1);
    s.positions = {{0, 0}};
    CHECK_THROWS_AS(estimate_shifts(s, 2), DataError);
  }
}

TEST_CASE("invalid construction")
{
  CHECK_THROWS_AS(build_operator({{0, 0}}, 0, {4, 4}), DataError);
  CHECK_THROWS_AS(build_operator({{0, 0}}, 3, {4, 4}), DataError);
  CHECK_THROWS_AS(build_operator({{std::nan(""), 0}}, 2, {4, 4}), DataError);
  auto const op = build_operator({{0, 0}}, 2, {4, 4});
  CHECK_THROWS_AS(op.apply(Matrix::Zero(15, 1)), DataError);
}
