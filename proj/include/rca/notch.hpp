#pragma once

#include "rca/field_model.hpp"

#include <span>
#include <utility>
#include <vector>

namespace rca {

/// Position-derived filter taps on a regular 1-D grid: off-centre taps -1/|u_i - u_c|^e,
/// centre tap a * sum_{j != c} 1/|u_j - u_c|^e.
struct NotchFilter {
  double e = 1.0;
  double a = 1.0;
  Vector taps;
};

/// Taps for uniformly spaced, sorted positions (odd count). Unit l2 norm when normalize is set.
/// Throws DataError on an even count, non-uniform spacing or duplicate positions.
NotchFilter notch_filter_1d(std::span<double const> positions, double e, double a, bool normalize = true);

/// ||v * psi||^2 with the centred, zero-boundary convolution h[j] = sum_i v_i psi_{j + c - i}.
double psi_regular(Vector const &v, NotchFilter const &filter);

/// sum_k ( sum_{i != k} (a v_k - v_i) / ||u_k - u_i||^e )^2.
double psi_hat(Vector const &v, std::vector<Position> const &positions, double e, double a);

/// Quadratic penalty v^T Q v with Q = P^T P and its eigenbasis.
struct GraphPenalty {
  double e = 1.0;
  double a = 1.0;
  Matrix P;
  Matrix Q;
  Matrix V_block; // orthonormal eigenvectors of Q, columns ordered by decreasing eigenvalue
  Vector d;       // eigenvalues, decreasing
};

/// P[i][j] = -1/||u_i - u_j||^e (i != j), P[i][i] = a * sum_{j != i} 1/||u_i - u_j||^e.
Matrix graph_matrix(std::vector<Position> const &positions, double e, double a);

GraphPenalty build_graph_penalty(std::vector<Position> const &positions, double e, double a);

/// Discretized (e, a) search box. Candidate index = ie * a_values.size() + ia.
struct ParameterGrid {
  std::vector<double> e_values;
  std::vector<double> a_values;

  std::size_t size() const { return e_values.size() * a_values.size(); }
  std::pair<double, double> at(std::size_t index) const
  {
    return {e_values[index / a_values.size()], a_values[index % a_values.size()]};
  }
};

/// True when the graph keeping edges with weight >= rel_threshold * max weight (weights 1/d^e) is connected.
bool thresholded_graph_connected(std::vector<Position> const &positions, double e, double rel_threshold = 1e-6);

/// Largest exponent in [1, e_cap] keeping the thresholded graph connected.
double max_connected_exponent(std::vector<Position> const &positions, double rel_threshold = 1e-6,
                              double e_cap = 8.0);

/// Log-spaced e in [1, e_max] (n_e values), linear a in [0, 2) (n_a values).
ParameterGrid default_grid(std::vector<Position> const &positions, int n_e = 15, int n_a = 10);

struct HarmonicDictionary {
  std::vector<std::pair<double, double>> params; // (e_i, a_i) per component
  std::vector<int> atoms;                        // winning eigenvector index inside each block
  Matrix V;                                      // p x (r p): concatenated eigenvector blocks
  Matrix A0;                                     // r x p initial weights, row i = winning eigenvector
  Matrix alpha0;                                 // r x (r p) indicator code with A0 = alpha0 V^T

  int rank() const { return static_cast<int>(params.size()); }
};

/// Greedy choice of r parameter pairs: each round picks the candidate (and eigenvector) maximizing
/// ||R v||_2 over the grid, then deflates R <- R - R v v^T. Ties go to the lowest grid index, then the
/// lowest eigenvector index.
HarmonicDictionary select_parameters(Matrix const &Y, std::vector<Position> const &positions, int r,
                                     ParameterGrid const &grid);

} // namespace rca
