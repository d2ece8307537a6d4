#include "rca/simulate.hpp"
#include "rca/metrics.hpp"

#include <array>
#include <cmath>
#include <random>

namespace rca {

void FieldSpec::validate() const
{
  if (p < 1) { throw DataError("field needs at least one PSF"); }
  if (hr_shape.rows < 1 || hr_shape.cols < 1) { throw DataError("empty image shape"); }
  if (!(sigma0 > 0.5)) { throw DataError("sigma0 must exceed 0.5 pixel"); }
  if (!(eps_max >= 0.0 && eps_max < 0.9)) { throw DataError("eps_max must lie in [0, 0.9)"); }
  if (!(size_variation >= 0.0) || sigma0 * (1.0 - size_variation) <= 0.5) {
    throw DataError("size variation lets the width drop below 0.5 pixel");
  }
  if (ring_amplitude < 0.0 || ring_width <= 0.0 || ring_radius_min > ring_radius_max) {
    throw DataError("invalid ring parameters");
  }
}

namespace {

// Degree-2 polynomial on [-1, 1]^2 with |value| <= 1.
struct Smooth2 {
  std::array<double, 6> c{};

  static Smooth2 random(std::mt19937_64 &rng)
  {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Smooth2 s;
    double total = 0.0;
    for (auto &v : s.c) {
      v = u(rng);
      total += std::abs(v);
    }
    for (auto &v : s.c) { v /= total; }
    return s;
  }

  double operator()(double x, double y) const
  {
    return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
  }
};

std::vector<Position> layout_positions(int p, Layout layout, std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Position> pos;
  pos.reserve(static_cast<std::size_t>(p));
  switch (layout) {
  case Layout::UniformRandom:
    for (int k = 0; k < p; ++k) {
      double const x = unit(rng);
      pos.push_back({x, unit(rng)});
    }
    break;
  case Layout::Grid: {
    int const n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    for (int k = 0; k < p; ++k) { pos.push_back({(k % n + 0.5) / n, (k / n + 0.5) / n}); }
    break;
  }
  case Layout::ClusteredCorners: {
    int const corners = p / 10;
    int const cluster = p / 10;
    for (int k = 0; k < p - corners - cluster; ++k) {
      double const x = unit(rng);
      pos.push_back({x, unit(rng)});
    }
    std::uniform_real_distribution<double> near(0.0, 0.08);
    for (int k = 0; k < corners; ++k) {
      double const dx = near(rng);
      double const dy = near(rng);
      pos.push_back({k % 2 ? 1.0 - dx : dx, (k / 2) % 2 ? 1.0 - dy : dy});
    }
    std::uniform_real_distribution<double> blob(-0.05, 0.05);
    for (int k = 0; k < cluster; ++k) {
      double const dx = blob(rng);
      pos.push_back({0.5 + dx, 0.3 + blob(rng)});
    }
    break;
  }
  }
  return pos;
}

} // namespace

Field generate_field(FieldSpec const &spec)
{
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Field f;
  f.positions = layout_positions(spec.p, spec.layout, rng);
  check_distinct(f.positions);

  Smooth2 width = Smooth2::random(rng);
  Smooth2 ell1 = Smooth2::random(rng);
  Smooth2 ell2 = Smooth2::random(rng);
  Smooth2 ring = Smooth2::random(rng);
  if (spec.spatially_constant) {
    for (auto *s : {&width, &ell1, &ell2, &ring}) {
      for (std::size_t i = 1; i < s->c.size(); ++i) { s->c[i] = 0.0; }
    }
  }

  Shape const sh = spec.hr_shape;
  double const ci = 0.5 * (sh.rows - 1);
  double const cj = 0.5 * (sh.cols - 1);
  f.truth = {Matrix(sh.size(), spec.p), sh};
  for (int k = 0; k < spec.p; ++k) {
    double const x = 2.0 * f.positions[k].x - 1.0;
    double const y = 2.0 * f.positions[k].y - 1.0;
    double const sigma = spec.sigma0 * (1.0 + spec.size_variation * width(x, y));
    double const e1 = spec.eps_max * ell1(x, y) / std::sqrt(2.0);
    double const e2 = spec.eps_max * ell2(x, y) / std::sqrt(2.0);
    double const radius =
        spec.ring_radius_min + 0.5 * (1.0 + ring(x, y)) * (spec.ring_radius_max - spec.ring_radius_min);

    // Covariance sigma^2 [[1 + e1, e2], [e2, 1 - e1]] in (row, col) coordinates.
    Eigen::Matrix2d C;
    C << 1.0 + e1, e2, e2, 1.0 - e1;
    C *= sigma * sigma;
    Eigen::Matrix2d const P = C.inverse();
    auto img = image_view(f.truth.X, k, sh);
    for (int i = 0; i < sh.rows; ++i) {
      for (int j = 0; j < sh.cols; ++j) {
        Eigen::Vector2d const d(i - ci, j - cj);
        double const q = d.dot(P * d);
        double v = std::exp(-0.5 * q);
        if (spec.ring_amplitude > 0.0) {
          double const rho = sigma * std::sqrt(q);
          v += spec.ring_amplitude * std::exp(-0.5 * std::pow((rho - radius) / spec.ring_width, 2));
        }
        img(i, j) = v;
      }
    }
    f.truth.X.col(k) /= f.truth.X.col(k).sum();
  }
  return f;
}

Degraded degrade_field(PsfMatrix const &X, std::vector<Position> const &positions, int m_d,
                       std::optional<double> snr_target, std::uint64_t seed, bool zero_shift)
{
  if (static_cast<int>(positions.size()) != X.count()) { throw DataError("one position per PSF is required"); }
  if (m_d < 1) { throw DataError("downsampling factor must be >= 1"); }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> half(-0.5, 0.5);

  Degraded out;
  out.shifts.resize(positions.size());
  if (!zero_shift) {
    for (auto &s : out.shifts) {
      s.row = half(rng) * m_d;
      s.col = half(rng) * m_d;
    }
  }
  DegradationOp const op = build_operator(out.shifts, m_d, X.hr_shape);
  Matrix Y = op.apply(X.X);

  double sigma = 0.0;
  if (snr_target) {
    double const mean_norm = Y.colwise().norm().mean();
    sigma = noise_for_snr(Vector::Constant(1, mean_norm), *snr_target, static_cast<int>(Y.rows()));
    std::normal_distribution<double> gauss(0.0, sigma);
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
      for (Eigen::Index i = 0; i < Y.rows(); ++i) { Y(i, k) += gauss(rng); }
    }
  }
  out.stack = {std::move(Y), positions, op.lr_shape(), sigma};
  out.stack.validate();
  return out;
}

} // namespace rca
