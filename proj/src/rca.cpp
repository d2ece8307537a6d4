#include "rca/rca.hpp"
#include "rca/baselines.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace rca {

std::vector<std::string> RcaConfig::validate(int p) const
{
  std::vector<std::string> warnings;
  if (r_init < 0) { throw DataError("r_init must be >= 0"); }
  if (r_init > p) { throw DataError("r_init exceeds the number of PSFs"); }
  if (!(kappa > 0.0)) { throw DataError("kappa must be positive"); }
  if (j_max < 0 || k_max < 0) { throw DataError("iteration counts must be >= 0"); }
  if (m_d < 1) { throw DataError("downsampling factor must be >= 1"); }
  if (s_max_iters < 1 || alpha_max_iters < 1) { throw DataError("solver iteration limits must be >= 1"); }
  if (!(s_rel_tol >= 0.0) || !(alpha_tol >= 0.0)) { throw DataError("solver tolerances must be >= 0"); }
  if (shifts && static_cast<int>(shifts->size()) != p) { throw DataError("one shift per PSF is required"); }
  if (grid && grid->size() == 0) { throw DataError("empty parameter grid"); }
  if (kappa < 2.0 || kappa > 5.0) { warnings.push_back("kappa outside the usual [2, 5] range"); }
  return warnings;
}

WeightState WeightState::from_sigma(Matrix Sigma, double mu, double kappa)
{
  if (!(mu > 0.0)) { throw DataError("gradient step must be positive"); }
  WeightState ws;
  ws.lambda = Sigma / mu;
  ws.Sigma = std::move(Sigma);
  ws.beta = Matrix::Ones(ws.lambda.rows(), ws.lambda.cols());
  ws.refresh_weights(kappa);
  return ws;
}

void WeightState::refresh_weights(double kappa) { W = kappa * beta.cwiseProduct(lambda); }

Matrix propagate_noise(DegradationOp const &op, double noise_sigma, Matrix const &A, SparsityDictionary const &dict,
                       double mu)
{
  if (noise_sigma < 0.0) { throw DataError("noise level must be >= 0"); }
  if (A.cols() != op.count()) { throw DataError("propagate_noise: weight matrix has the wrong number of columns"); }
  if (dict.image_shape() != op.hr_shape()) { throw DataError("propagate_noise: dictionary shape mismatch"); }
  Matrix const var = Matrix::Constant(op.lr_shape().size(), op.count(), noise_sigma * noise_sigma);
  Matrix const pixel_var = op.apply_squared_adjoint(var) * A.cwiseAbs2().transpose();
  return mu * dict.forward_squared(pixel_var).cwiseMax(0.0).cwiseSqrt();
}

Matrix hard_soft_denoise(Matrix const &S_raw, Matrix const &Sigma, double kappa)
{
  return soft_threshold(S_raw, kappa * Sigma);
}

Matrix update_beta(Matrix const &S, Matrix const &lambda, double kappa, SparsityDictionary const &dict)
{
  Matrix const coeffs = dict.forward(S).cwiseAbs();
  if (coeffs.rows() != lambda.rows() || coeffs.cols() != lambda.cols()) {
    throw DataError("update_beta: threshold shape mismatch");
  }
  Matrix const klam = kappa * lambda;
  double eps = 1e-12 * (klam.size() ? klam.maxCoeff() : 0.0);
  if (!(eps > 0.0)) { eps = std::numeric_limits<double>::min(); }
  return (1.0 + coeffs.array() / klam.array().max(eps)).inverse().matrix();
}

int prune_components(Matrix &alpha, Matrix &S, Matrix &A)
{
  if (alpha.rows() != A.rows() || S.cols() != A.rows()) { throw DataError("prune_components: shape mismatch"); }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    if ((alpha.row(i).array() != 0.0).any() && (A.row(i).array() != 0.0).any()) { keep.push_back(i); }
  }
  if (keep.empty()) { throw SolverError("model collapsed"); }
  if (static_cast<Eigen::Index>(keep.size()) == alpha.rows()) { return static_cast<int>(keep.size()); }
  alpha = alpha(keep, Eigen::all).eval();
  A = A(keep, Eigen::all).eval();
  S = S(Eigen::all, keep).eval();
  return static_cast<int>(keep.size());
}

int auto_rank(Matrix const &Y, double noise_sigma, int cap)
{
  Vector const s = Eigen::BDCSVD<Matrix>(Y).singularValues();
  double threshold = 0.0;
  if (noise_sigma > 0.0) {
    double const edge = std::sqrt(static_cast<double>(Y.rows())) + std::sqrt(static_cast<double>(Y.cols()));
    threshold = noise_sigma * edge;
  } else {
    threshold = 1e-10 * (s.size() ? s[0] : 0.0);
  }
  int const count = static_cast<int>((s.array() > threshold).count());
  return std::clamp(count, 1, std::max(1, std::min<int>(cap, static_cast<int>(Y.cols()))));
}

namespace {

std::vector<int> support_sizes(Matrix const &alpha)
{
  std::vector<int> out;
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    out.push_back(static_cast<int>((alpha.row(i).array() != 0.0).count()));
  }
  return out;
}

} // namespace

RcaResult run_rca(ObservationStack const &stack, RcaConfig const &config, std::ostream *log)
{
  stack.validate();
  int const p = stack.count();
  RcaResult out;
  RcaDiagnostics &diag = out.diagnostics;
  diag.warnings = config.validate(p);
  Matrix const &Y = stack.Y;

  Shape const hr{stack.patch_shape.rows * config.m_d, stack.patch_shape.cols * config.m_d};
  DegradationOp op = DegradationOp::identity(hr, p);
  if (config.shifts) {
    op = build_operator(*config.shifts, config.m_d, hr);
  } else if (config.m_d > 1) {
    op = build_operator(estimate_shifts(stack, config.m_d), config.m_d, hr);
  }
  diag.shifts = op.shifts();
  SparsityDictionary const dict = config.dict_kind == DictionaryKind::Starlet2
                                      ? SparsityDictionary::starlet(hr, config.n_scales)
                                      : SparsityDictionary::identity(hr);

  int const r = config.r_init > 0 ? config.r_init : auto_rank(Y, stack.noise_sigma);
  diag.r_init = r;
  ParameterGrid const grid = config.grid ? *config.grid : default_grid(stack.positions);
  HarmonicDictionary const hd = select_parameters(Y, stack.positions, r, grid);

  Matrix V;
  Matrix alpha;
  Matrix A = hd.A0;
  if (config.weight_mode == WeightMode::Harmonic) {
    V = hd.V;
    alpha = hd.alpha0;
  } else {
    V = Matrix::Identity(p, p);
    alpha = A;
  }
  Matrix S = Matrix::Zero(hr.size(), r);

  SupportSchedule schedule;
  schedule.k_max = config.alpha_max_iters;
  schedule.tol = config.alpha_tol;

  for (int k = 0; k <= config.k_max; ++k) {
    ProxContext const ctx = make_prox_context(op, A, dict, config.s_max_iters, config.s_rel_tol);
    diag.mu = ctx.tau;
    WeightState ws = WeightState::from_sigma(propagate_noise(op, stack.noise_sigma, A, dict, ctx.tau), ctx.tau,
                                             config.kappa);
    double cost = 0.0;
    for (int j = 0; j <= config.j_max; ++j) {
      SStepResult const sr = solve_S_step(Y, op, A, ws.W, dict, ctx, S);
      S = sr.S;
      cost = component_cost(Y, op, S, A, ws.W, dict);
      Matrix const SA = S * A;
      diag.trace.push_back({k, j, cost, SA.minCoeff(), SA.maxCoeff(), static_cast<int>(S.cols()), support_sizes(alpha)});
      if (log) {
        *log << "k=" << k << " j=" << j << " H=" << cost << " S-iters=" << sr.iterations << " r=" << S.cols()
             << '\n';
      }
      if (j < config.j_max) {
        ws.beta = update_beta(S, ws.lambda, config.kappa, dict);
        ws.refresh_weights(config.kappa);
      }
    }
    diag.outer_cost.push_back(cost);
    if (k == config.k_max) { break; }

    if (config.weight_mode == WeightMode::Harmonic) {
      AlphaStepResult const ar = solve_alpha_step(Y, op, S, V, schedule);
      alpha = ar.alpha;
      A = alpha * V.transpose();
    } else {
      A = rca_lsq_weights(Y, op, S);
      alpha = A;
    }
    if (!A.allFinite()) { throw SolverError("weight update produced non-finite values"); }
    {
      Matrix const SA = S * A;
      diag.trace.push_back({k, -1, component_cost(Y, op, S, A, ws.W, dict), SA.minCoeff(), SA.maxCoeff(),
                            static_cast<int>(S.cols()), support_sizes(alpha)});
    }

    // Unit-norm weight rows; the matching component absorbs the scale so S A is unchanged.
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double const n = A.row(i).norm();
      if (n > 0.0) {
        A.row(i) /= n;
        if (config.weight_mode == WeightMode::Harmonic) {
          alpha.row(i) /= n;
        } else {
          alpha.row(i) = A.row(i);
        }
        S.col(i) *= n;
      }
    }
    prune_components(alpha, S, A);
  }

  diag.r_effective = static_cast<int>(S.cols());
  Matrix const X = S * A;
  Matrix X_hat = X.cwiseMax(0.0);
  double const xn = X_hat.norm();
  diag.clamp_ratio = xn > 0.0 ? (X_hat - X).norm() / xn : 0.0;
  out.X_hat = {std::move(X_hat), hr};
  out.model = {std::move(S), std::move(alpha), std::move(V), std::move(A)};
  return out;
}

void write_trace_csv(RcaDiagnostics const &diag, std::ostream &out)
{
  out << "outer_k,inner_j,cost_H,min_entry_SAV,max_entry_SAV,r_effective,support_sizes\n";
  out.precision(17);
  for (auto const &row : diag.trace) {
    out << row.outer_k << ',' << row.inner_j << ',' << row.cost_H << ',' << row.min_entry_SAV << ','
        << row.max_entry_SAV << ',' << row.r_effective << ',';
    for (std::size_t i = 0; i < row.support_sizes.size(); ++i) { out << (i ? ";" : "") << row.support_sizes[i]; }
    out << '\n';
  }
}

} // namespace rca
