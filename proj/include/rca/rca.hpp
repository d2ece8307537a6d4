#pragma once

#include "rca/degradation.hpp"
#include "rca/field_model.hpp"
#include "rca/notch.hpp"
#include "rca/prox.hpp"
#include "rca/transforms.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rca {

/// How A is refreshed between component updates.
enum class WeightMode {
  Harmonic,    // sparse code over the harmonic dictionary (default)
  LeastSquares // unconstrained per-PSF least squares, no spatial prior
};

struct RcaConfig {
  int r_init = 0; // 0: pick from the singular spectrum of Y (see auto_rank)
  double kappa = 3.0;
  int j_max = 3;
  int k_max = 5;
  std::optional<ParameterGrid> grid; // default_grid(positions) when unset
  DictionaryKind dict_kind = DictionaryKind::Starlet2;
  int n_scales = 0; // starlet bands, 0 = default
  int m_d = 1;
  std::optional<std::vector<Shift>> shifts; // estimated from the data when unset and m_d > 1
  int s_max_iters = 500;
  double s_rel_tol = 1e-6;
  int alpha_max_iters = 500;
  double alpha_tol = 1e-6;
  WeightMode weight_mode = WeightMode::Harmonic;

  /// Throws DataError on invalid values. Returns warnings (kappa outside [2, 5]).
  std::vector<std::string> validate(int p) const;
};

struct WeightState {
  Matrix Sigma;  // propagated noise std, one column per component
  Matrix lambda; // Sigma / mu
  Matrix beta;   // reweighting multipliers in (0, 1]
  Matrix W;      // kappa * beta (.) lambda

  static WeightState from_sigma(Matrix Sigma, double mu, double kappa);
  void refresh_weights(double kappa);
};

/// mu sqrt((Phi (.) Phi) F^2*(sigma^2 1) (A (.) A)^T): std of the noise carried into the analysis coefficients of
/// S by one gradient step of size mu.
Matrix propagate_noise(DegradationOp const &op, double noise_sigma, Matrix const &A, SparsityDictionary const &dict,
                       double mu);

/// Entrywise soft threshold at kappa Sigma.
Matrix hard_soft_denoise(Matrix const &S_raw, Matrix const &Sigma, double kappa);

/// 1 / (1 + |Phi S| / max(kappa lambda, eps)), eps = 1e-12 max(kappa lambda).
Matrix update_beta(Matrix const &S, Matrix const &lambda, double kappa, SparsityDictionary const &dict);

/// Drops components whose code row is identically zero. Returns the remaining count.
/// Throws SolverError("model collapsed") when nothing remains.
int prune_components(Matrix &alpha, Matrix &S, Matrix &A);

/// Number of singular values of Y above the noise edge sigma (sqrt(n) + sqrt(p)), clamped to [1, cap].
/// Without noise, counts singular values above 1e-10 of the largest.
int auto_rank(Matrix const &Y, double noise_sigma, int cap = 15);

struct TraceRow {
  int outer_k = 0;
  int inner_j = 0;      // -1 marks the row written after the weight update
  double cost_H = 0.0;  // 1/2 ||Y - F(S A)||^2 + sum ||w (.) Phi s||_1 with the current weights
  double min_entry_SAV = 0.0;
  double max_entry_SAV = 0.0;
  int r_effective = 0;
  std::vector<int> support_sizes;
};

struct RcaDiagnostics {
  std::vector<TraceRow> trace;
  std::vector<double> outer_cost; // H after the component phase of each outer iteration
  std::vector<Shift> shifts;
  double mu = 0.0;
  double clamp_ratio = 0.0; // ||clamp adjustment||_F / ||X_hat||_F
  int r_init = 0;
  int r_effective = 0;
  std::vector<std::string> warnings;
};

struct RcaResult {
  Factorization model;
  PsfMatrix X_hat; // clamp_+(S A)
  RcaDiagnostics diagnostics;
};

RcaResult run_rca(ObservationStack const &stack, RcaConfig const &config, std::ostream *log = nullptr);

/// CSV: outer_k,inner_j,cost_H,min_entry_SAV,max_entry_SAV,r_effective,support_sizes (';'-joined).
void write_trace_csv(RcaDiagnostics const &diag, std::ostream &out);

} // namespace rca
