#include "rca/prox.hpp"
#include "rca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace rca {

Matrix soft_threshold(Matrix const &x, Matrix const &t)
{
  if (x.rows() != t.rows() || x.cols() != t.cols()) { throw DataError("soft_threshold: shape mismatch"); }
  return x.array().sign() * (x.array().abs() - t.array()).max(0.0);
}

Matrix soft_threshold(Matrix const &x, double t) { return x.array().sign() * (x.array().abs() - t).max(0.0); }

Matrix project_nonneg(Matrix const &X) { return X.cwiseMax(0.0); }

Matrix prox_conjugate(ProxOperator const &prox_of_F, Matrix const &x, double lambda)
{
  if (!(lambda > 0.0)) { throw DataError("prox_conjugate: lambda must be positive"); }
  return x - lambda * prox_of_F(x / lambda, 1.0 / lambda);
}

Matrix project_row_support(Matrix const &M, int k)
{
  if (k < 0) { throw DataError("support size must be >= 0"); }
  Eigen::Index const n = M.cols();
  if (k >= n) { return M; }
  Matrix out = Matrix::Zero(M.rows(), n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    auto const before = [&](Eigen::Index a, Eigen::Index b) {
      double const ma = std::abs(M(i, a));
      double const mb = std::abs(M(i, b));
      return ma > mb || (ma == mb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + k, idx.end(), before);
    for (int t = 0; t < k; ++t) { out(i, idx[t]) = M(i, idx[t]); }
  }
  return out;
}

bool ProxContext::step_condition_holds() const
{
  return tau > 0.0 && sigma_dual > 0.0 && tau * (0.5 * lipschitz + sigma_dual * op_norm * op_norm) < 1.0;
}

ProxContext make_prox_context(DegradationOp const &op, Matrix const &A, SparsityDictionary const &dict,
                              int max_iters, double rel_tol)
{
  ProxContext ctx;
  ctx.max_iters = max_iters;
  ctx.rel_tol = rel_tol;
  double const lh = spectral_norm(op, A);
  ctx.lipschitz = lh * lh;

  auto const a_normal = [&](Matrix const &X) { return Matrix(X * A * A.transpose()); };
  double const a_norm = power_iteration(a_normal, 1, A.rows()).norm;
  double l2 = a_norm * a_norm;
  if (dict.kind() != DictionaryKind::Identity) {
    auto const phi_normal = [&](Matrix const &x) { return dict.adjoint(dict.forward(x)); };
    double const phi_norm = power_iteration(phi_normal, dict.image_shape().size(), 1).norm;
    l2 += phi_norm * phi_norm;
  }
  ctx.op_norm = std::sqrt(l2);
  if (!(ctx.op_norm > 0.0)) { throw SolverError("degenerate weights: zero operator norm"); }
  ctx.sigma_dual = 1.0 / ctx.op_norm;
  ctx.tau = 1.0 / (0.5 * ctx.lipschitz + ctx.sigma_dual * l2 + 1e-3);
  return ctx;
}

double component_cost(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &A, Matrix const &W,
                      SparsityDictionary const &dict)
{
  double const fit = 0.5 * (Y - op.apply(S * A)).squaredNorm();
  return fit + (W.array() * dict.forward(S).array().abs()).sum();
}

SStepResult solve_S_step(Matrix const &Y, DegradationOp const &op, Matrix const &A, Matrix const &W,
                         SparsityDictionary const &dict, ProxContext const &ctx, std::optional<Matrix> const &S0,
                         std::ostream *trace)
{
  Eigen::Index const n = op.hr_shape().size();
  Eigen::Index const r = A.rows();
  if (A.cols() != op.count() || Y.cols() != op.count() || Y.rows() != op.lr_shape().size()) {
    throw DataError("S-step: inconsistent shapes");
  }
  if (W.rows() != dict.coefficient_count() || W.cols() != r) { throw DataError("S-step: threshold matrix shape"); }
  if (!Y.allFinite() || !A.allFinite() || !W.allFinite()) { throw SolverError("S-step: non-finite input"); }
  if ((W.array() < 0.0).any()) { throw DataError("S-step: negative thresholds"); }
  if (!ctx.step_condition_holds()) { throw SolverError("S-step: primal-dual step-size condition violated"); }

  bool const analysis = dict.kind() != DictionaryKind::Identity;
  SStepResult res;
  Matrix S = S0 ? *S0 : Matrix::Zero(n, r);
  if (S.rows() != n || S.cols() != r) { throw DataError("S-step: warm start shape"); }
  Matrix Z1 = Matrix::Zero(n, op.count()); // positivity dual
  Matrix Z2 = analysis ? Matrix::Zero(dict.coefficient_count(), r) : Matrix();
  Matrix const tauW = ctx.tau * W;

  if (trace) { *trace << "iteration,cost\n"; }
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < ctx.max_iters; ++it) {
    Matrix const resid = Y - op.apply(S * A);
    Matrix const coeffs = dict.forward(S);
    double const cost = 0.5 * resid.squaredNorm() + (W.array() * coeffs.array().abs()).sum();
    if (!std::isfinite(cost)) { throw SolverError("S-step diverged"); }
    res.cost.push_back(cost);
    if (trace) { *trace << it << ',' << cost << '\n'; }
    if (it >= 5 && std::abs(prev - cost) <= ctx.rel_tol * std::max(cost, 1e-300)) { break; }
    prev = cost;

    Matrix step = -op.apply_adjoint(resid) * A.transpose() + Z1 * A.transpose();
    if (analysis) { step += dict.adjoint(Z2); }
    Matrix S_next = S - ctx.tau * step;
    if (!analysis) { S_next = soft_threshold(S_next, tauW); }

    Matrix const extrap = 2.0 * S_next - S;
    Z1 = (Z1 + ctx.sigma_dual * extrap * A).cwiseMin(0.0);
    if (analysis) {
      Z2 = (Z2 + ctx.sigma_dual * dict.forward(extrap)).cwiseMax(-W).cwiseMin(W);
    }
    S = std::move(S_next);
    res.iterations = it + 1;
  }
  res.min_entry = (S * A).minCoeff();
  res.S = std::move(S);
  return res;
}

namespace {

/// alpha V^T, skipping zero entries of alpha.
Matrix sparse_code_product(Matrix const &alpha, Matrix const &V)
{
  Matrix A = Matrix::Zero(alpha.rows(), V.rows());
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    for (Eigen::Index l = 0; l < alpha.cols(); ++l) {
      double const c = alpha(i, l);
      if (c != 0.0) { A.row(i) += c * V.col(l).transpose(); }
    }
  }
  return A;
}

std::vector<std::set<Eigen::Index>> row_supports(Matrix const &M)
{
  std::vector<std::set<Eigen::Index>> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index l = 0; l < M.cols(); ++l) {
      if (M(i, l) != 0.0) { out[static_cast<std::size_t>(i)].insert(l); }
    }
  }
  return out;
}

} // namespace

double code_cost(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &alpha, Matrix const &V)
{
  return 0.5 * (Y - op.apply(S * sparse_code_product(alpha, V))).squaredNorm();
}

AlphaStepResult solve_alpha_step(Matrix const &Y, DegradationOp const &op, Matrix const &S, Matrix const &V,
                                 SupportSchedule const &schedule, std::optional<double> rho, std::ostream *trace)
{
  Eigen::Index const r = S.cols();
  Eigen::Index const N = V.cols();
  if (V.rows() != op.count() || S.rows() != op.hr_shape().size() || Y.cols() != op.count()) {
    throw DataError("alpha-step: inconsistent shapes");
  }
  if (!S.allFinite() || !Y.allFinite()) { throw SolverError("alpha-step: non-finite input"); }

  AlphaStepResult res;
  if (rho) {
    if (!(*rho > 0.0)) { throw DataError("alpha-step: rho must be positive"); }
    res.rho = *rho;
  } else {
    auto const normal = [&](Matrix const &a) {
      return Matrix(S.transpose() * op.apply_adjoint(op.apply(S * (a * V.transpose()))) * V);
    };
    double const lip = power_iteration(normal, r, N).norm;
    res.rho = 1.05 * lip * lip;
    if (!(res.rho > 0.0)) { throw SolverError("alpha-step: zero Lipschitz constant (all components null)"); }
  }

  Matrix alpha = Matrix::Zero(r, N);
  Matrix beta = alpha;
  double t = 1.0;
  double res_prev = 0.0;
  double res_cur = 0.0;
  std::vector<std::set<Eigen::Index>> plateau_support;

  if (trace) { *trace << "iteration,residual,support_cap\n"; }
  int k = 0;
  while (k < schedule.k_max) {
    if (k >= 2) {
      if (res_cur == 0.0 || std::abs(res_cur - res_prev) / res_cur < schedule.tol) { break; }
    }
    Matrix const resid = Y - op.apply(S * sparse_code_product(beta, V));
    double const j_beta = 0.5 * resid.squaredNorm();
    Matrix const grad = -(S.transpose() * op.apply_adjoint(resid)) * V;
    Matrix const U = beta - grad / res.rho;
    int const cap = schedule.cap(k);
    Matrix alpha_next = project_row_support(U, cap);

    double const t_next = 0.5 * (1.0 + std::sqrt(4.0 * t * t + 1.0));
    double const lambda = 1.0 + (t - 1.0) / t_next;
    beta = alpha + lambda * (alpha_next - alpha);
    res_prev = res_cur;
    res_cur = j_beta;
    res.residual.push_back(j_beta);
    if (trace) { *trace << k << ',' << j_beta << ',' << cap << '\n'; }

    alpha = std::move(alpha_next);
    t = t_next;
    ++k;

    if (schedule.cap(k) > cap) {
      auto supports = row_supports(alpha);
      if (!plateau_support.empty()) {
        for (std::size_t i = 0; i < supports.size(); ++i) {
          if (!std::includes(supports[i].begin(), supports[i].end(), plateau_support[i].begin(),
                             plateau_support[i].end())) {
            ++res.support_violations;
          }
        }
      }
      plateau_support = std::move(supports);
      ++res.plateau_count;
    }
  }
  res.iterations = k;
  for (Eigen::Index i = 0; i < r; ++i) {
    res.support_sizes.push_back(static_cast<int>((alpha.row(i).array() != 0.0).count()));
  }
  res.alpha = std::move(alpha);
  return res;
}

} // namespace rca
