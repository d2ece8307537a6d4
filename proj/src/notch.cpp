#include "rca/notch.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rca {

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i)
  {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  bool unite(int a, int b)
  {
    a = find(a);
    b = find(b);
    if (a == b) { return false; }
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

} // namespace

NotchFilter notch_filter_1d(std::span<double const> u, double e, double a, bool normalize)
{
  std::size_t const p = u.size();
  if (p == 0 || p % 2 == 0) { throw DataError("notch filter needs an odd number of positions"); }
  if (p > 1) {
    double const step = u[1] - u[0];
    if (!(step > 0.0)) { throw DataError("notch filter positions must be sorted and distinct"); }
    for (std::size_t i = 1; i < p; ++i) {
      double const d = u[i] - u[i - 1];
      if (!(d > 0.0)) { throw DataError("notch filter positions must be sorted and distinct"); }
      if (std::abs(d - step) > 1e-9 * step) { throw DataError("notch filter positions must be uniformly spaced"); }
    }
  }
  std::size_t const c = p / 2;
  NotchFilter f{e, a, Vector::Zero(static_cast<Eigen::Index>(p))};
  double centre = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    if (i == c) { continue; }
    double const w = 1.0 / std::pow(std::abs(u[i] - u[c]), e);
    f.taps[static_cast<Eigen::Index>(i)] = -w;
    centre += a * w;
  }
  f.taps[static_cast<Eigen::Index>(c)] = centre;
  if (normalize) { f.taps /= f.taps.norm(); }
  return f;
}

double psi_regular(Vector const &v, NotchFilter const &filter)
{
  auto const p = filter.taps.size();
  if (v.size() != p) { throw DataError("psi_regular: vector and filter lengths differ"); }
  auto const c = p / 2;
  double total = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      Eigen::Index const t = j + c - i;
      if (t >= 0 && t < p) { h += v[i] * filter.taps[t]; }
    }
    total += h * h;
  }
  return total;
}

double psi_hat(Vector const &v, std::vector<Position> const &positions, double e, double a)
{
  auto const p = static_cast<Eigen::Index>(positions.size());
  if (v.size() != p) { throw DataError("psi_hat: vector length must equal the number of positions"); }
  check_distinct(positions);
  double total = 0.0;
  for (Eigen::Index k = 0; k < p; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (i == k) { continue; }
      s += (a * v[k] - v[i]) / std::pow(distance(positions[k], positions[i]), e);
    }
    total += s * s;
  }
  return total;
}

Matrix graph_matrix(std::vector<Position> const &positions, double e, double a)
{
  check_distinct(positions);
  auto const p = static_cast<Eigen::Index>(positions.size());
  Matrix P(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double diag = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) { continue; }
      double const w = 1.0 / std::pow(distance(positions[i], positions[j]), e);
      P(i, j) = -w;
      diag += w;
    }
    P(i, i) = a * diag;
  }
  return P;
}

GraphPenalty build_graph_penalty(std::vector<Position> const &positions, double e, double a)
{
  GraphPenalty g;
  g.e = e;
  g.a = a;
  g.P = graph_matrix(positions, e, a);
  g.Q = g.P.transpose() * g.P;

  // Eigenvectors are scale invariant; solve on the rescaled matrix to keep entries O(1).
  double const scale = g.P.cwiseAbs().maxCoeff();
  Matrix const Pn = g.P / scale;
  Matrix Qn = Pn.transpose() * Pn;
  Qn = 0.5 * (Qn + Qn.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Qn);
  if (eig.info() != Eigen::Success) { throw SolverError("eigendecomposition of graph penalty failed"); }
  g.d = eig.eigenvalues().reverse() * (scale * scale);
  g.V_block = eig.eigenvectors().rowwise().reverse();
  return g;
}

bool thresholded_graph_connected(std::vector<Position> const &positions, double e, double rel_threshold)
{
  int const p = static_cast<int>(positions.size());
  if (p <= 1) { return true; }
  double d_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) { d_min = std::min(d_min, distance(positions[i], positions[j])); }
  }
  // weight_ij / max weight = (d_min / d_ij)^e
  double const log_thr = std::log(rel_threshold);
  DisjointSets sets(p);
  int components = p;
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      if (e * std::log(d_min / distance(positions[i], positions[j])) >= log_thr && sets.unite(i, j)) {
        --components;
      }
    }
  }
  return components == 1;
}

double max_connected_exponent(std::vector<Position> const &positions, double rel_threshold, double e_cap)
{
  check_distinct(positions);
  if (thresholded_graph_connected(positions, e_cap, rel_threshold)) { return e_cap; }
  if (!thresholded_graph_connected(positions, 1.0, rel_threshold)) { return 1.0; }
  double lo = 1.0;
  double hi = e_cap;
  for (int it = 0; it < 60; ++it) {
    double const mid = 0.5 * (lo + hi);
    if (thresholded_graph_connected(positions, mid, rel_threshold)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

ParameterGrid default_grid(std::vector<Position> const &positions, int n_e, int n_a)
{
  if (n_e < 1 || n_a < 1) { throw DataError("parameter grid needs at least one value per axis"); }
  double const e_max = max_connected_exponent(positions);
  ParameterGrid grid;
  for (int i = 0; i < n_e; ++i) {
    double const t = n_e == 1 ? 0.0 : static_cast<double>(i) / (n_e - 1);
    grid.e_values.push_back(std::pow(e_max, t));
  }
  for (int j = 0; j < n_a; ++j) { grid.a_values.push_back(2.0 * j / n_a); }
  return grid;
}

HarmonicDictionary select_parameters(Matrix const &Y, std::vector<Position> const &positions, int r,
                                     ParameterGrid const &grid)
{
  auto const p = static_cast<Eigen::Index>(positions.size());
  if (r < 1) { throw DataError("number of components must be >= 1"); }
  if (r > p) { throw DataError("number of components exceeds the number of PSFs"); }
  if (grid.size() == 0) { throw DataError("empty parameter grid"); }
  if (Y.cols() != p) { throw DataError("observation count differs from position count"); }

  std::vector<Matrix> bases;
  bases.reserve(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    auto const [e, a] = grid.at(c);
    bases.push_back(build_graph_penalty(positions, e, a).V_block);
  }

  // ||R w||^2 = w^T G w with G = R^T R; kept per candidate and updated by rank-one deflation.
  Matrix R = Y;
  Matrix G = R.transpose() * R;
  std::vector<Vector> energy;
  energy.reserve(grid.size());
  for (auto const &W : bases) { energy.push_back((W.array() * (G * W).array()).colwise().sum().transpose()); }

  HarmonicDictionary dict;
  dict.V.resize(p, r * p);
  dict.A0.resize(r, p);
  dict.alpha0 = Matrix::Zero(r, r * p);
  for (int round = 0; round < r; ++round) {
    std::size_t best_c = 0;
    Eigen::Index best_k = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (energy[c][k] > best) {
          best = energy[c][k];
          best_c = c;
          best_k = k;
        }
      }
    }
    Vector const v = bases[best_c].col(best_k);
    dict.params.push_back(grid.at(best_c));
    dict.atoms.push_back(static_cast<int>(best_k));
    dict.V.middleCols(round * p, p) = bases[best_c];
    dict.A0.row(round) = v.transpose();
    dict.alpha0(round, round * p + best_k) = 1.0;

    Vector const g = G * v;
    double const vgv = v.dot(g);
    for (std::size_t c = 0; c < grid.size(); ++c) {
      Vector const wv = bases[c].transpose() * v;
      Vector const wg = bases[c].transpose() * g;
      energy[c] = (energy[c].array() - 2.0 * wv.array() * wg.array() + vgv * wv.array().square()).max(0.0);
    }
    R -= (R * v) * v.transpose();
    G = R.transpose() * R;
  }
  return dict;
}

} // namespace rca
