#pragma once

#include "rca/degradation.hpp"
#include "rca/field_model.hpp"
#include "rca/transforms.hpp"

#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace rca {

/// Entrywise sign(x) max(|x| - t, 0).
Matrix soft_threshold(Matrix const &x, Matrix const &t);
Matrix soft_threshold(Matrix const &x, double t);

/// Entrywise max(x, 0).
Matrix project_nonneg(Matrix const &X);

/// prox_{gamma F}(v), for some proper convex F.
using ProxOperator = std::function<Matrix(Matrix const &v, double gamma)>;

/// Moreau identity: prox_{lambda F*}(x) = x - lambda prox_{F / lambda}(x / lambda).
Matrix prox_conjugate(ProxOperator const &prox_of_F, Matrix const &x, double lambda);

/// Per row, keep the k largest-magnitude entries (ties: lowest column index) and zero the rest.
Matrix project_row_support(Matrix const &M, int k);

/// Primal-dual parameters for the component step.
struct ProxContext {
  double tau = 0.0;        // primal step (also the gradient step mu used for noise propagation)
  double sigma_dual = 0.0; // dual step
  double lipschitz = 0.0;  // Lipschitz constant of the data-term gradient, ||X -> F(X A)||^2
  double op_norm = 0.0;    // ||L|| for the stacked constraint/analysis operators
  int max_iters = 500;
  double rel_tol = 1e-6;

  /// tau (lipschitz / 2 + sigma_dual op_norm^2) < 1
  bool step_condition_holds() const;
};

/// Step sizes sigma = 1/||L||, tau = 1/(L_H/2 + sigma ||L||^2 + 1e-3), with norms from power iteration.
ProxContext make_prox_context(DegradationOp const &op, Matrix const &A, SparsityDictionary const &dict,
                              int max_iters = 500, double rel_tol = 1e-6);

/// 1/2 ||Y - F(S A)||_F^2 + sum_i ||w_i (.) Phi s_i||_1
double component_cost(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &A, Matrix const &W,
                      SparsityDictionary const &dict);

struct SStepResult {
  Matrix S;
  std::vector<double> cost; // objective at each iterate (without the positivity indicator)
  int iterations = 0;
  double min_entry = 0.0; // smallest entry of S A at the returned iterate
};

/// min_S 1/2 ||Y - F(S A)||^2 + sum_i ||w_i (.) Phi s_i||_1  s.t. S A >= 0, by Condat-Vu primal-dual splitting.
/// W has one column per component and dict.coefficient_count() rows. Warm-starts from S0 when given.
SStepResult solve_S_step(Matrix const &Y, DegradationOp const &op, Matrix const &A, Matrix const &W,
                         SparsityDictionary const &dict, ProxContext const &ctx,
                         std::optional<Matrix> const &S0 = std::nullopt, std::ostream *trace = nullptr);

/// Support-size cap floor(f(k)) at iteration k.
struct SupportSchedule {
  std::function<double(int)> f = [](int k) { return std::sqrt(static_cast<double>(k)) + 1.0; };
  int k_max = 500;
  double tol = 1e-6;

  int cap(int k) const { return static_cast<int>(std::floor(f(k))); }
};

struct AlphaStepResult {
  Matrix alpha;
  int iterations = 0;
  double rho = 0.0;
  std::vector<double> residual;   // J(beta_k) per iteration
  std::vector<int> support_sizes; // realized nonzeros per row of the returned alpha
  int plateau_count = 0;          // support-size plateaus completed
  int support_violations = 0;     // rows whose support at a plateau end dropped an index of the previous plateau
};

/// J(alpha) = 1/2 ||Y - F(S alpha V^T)||^2
double code_cost(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &alpha, Matrix const &V);

/// Accelerated projected gradient with growing per-row support (Beck-Teboulle iteration, projection
/// onto the top-floor(f(k)) entries per row). Without rho, uses 1.05 x the power-iteration Lipschitz estimate.
/// Throws DataError for rho <= 0.
AlphaStepResult solve_alpha_step(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &V,
                                 SupportSchedule const &schedule, std::optional<double> rho = std::nullopt,
                                 std::ostream *trace = nullptr);

} // namespace rca
