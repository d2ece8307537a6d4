#include "rca/linalg.hpp"

#include <cmath>
#include <random>

namespace rca {

PowerIterationResult power_iteration(NormalOperator const &normal, Eigen::Index rows, Eigen::Index cols,
                                     double rel_tol, int max_iters)
{
  std::mt19937_64 gen(0x5eed);
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) { x.data()[i] = N(gen); }
  x /= x.norm();

  PowerIterationResult res;
  double lambda = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Matrix y = normal(x);
    double const next = y.norm();
    res.iterations = it;
    if (next == 0.0) {
      lambda = 0.0;
      break;
    }
    x = y / next;
    bool const done = it > 1 && std::abs(next - lambda) <= rel_tol * next;
    lambda = next;
    if (done) { break; }
  }
  res.norm = std::sqrt(lambda);
  return res;
}

} // namespace rca
