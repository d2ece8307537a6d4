#include "rca/baselines.hpp"
#include "rca/metrics.hpp"
#include "rca/rca.hpp"
#include "rca/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace rca;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string g_command_line;

struct FieldFlags {
  FieldSpec spec;
  std::string layout = "uniform";

  FieldSpec resolve() const
  {
    static std::map<std::string, Layout> const names{
        {"uniform", Layout::UniformRandom}, {"grid", Layout::Grid}, {"corners", Layout::ClusteredCorners}};
    FieldSpec s = spec;
    s.layout = names.at(layout);
    return s;
  }
};

void add_field_flags(CLI::App *cmd, FieldFlags &f)
{
  cmd->add_option("--p", f.spec.p, "number of stars")->check(CLI::PositiveNumber);
  cmd->add_option("--rows", f.spec.hr_shape.rows, "high-resolution patch rows")->check(CLI::PositiveNumber);
  cmd->add_option("--cols", f.spec.hr_shape.cols, "high-resolution patch columns")->check(CLI::PositiveNumber);
  cmd->add_option("--layout", f.layout, "star layout")->check(CLI::IsMember({"uniform", "grid", "corners"}));
  cmd->add_option("--sigma0", f.spec.sigma0, "base Gaussian width (HR pixels)");
  cmd->add_option("--size-variation", f.spec.size_variation, "relative width variation");
  cmd->add_option("--eps-max", f.spec.eps_max, "ellipticity bound");
  cmd->add_option("--ring-amplitude", f.spec.ring_amplitude, "ring peak relative to the core peak");
  cmd->add_option("--ring-radius-min", f.spec.ring_radius_min, "smallest ring radius");
  cmd->add_option("--ring-radius-max", f.spec.ring_radius_max, "largest ring radius");
  cmd->add_option("--ring-width", f.spec.ring_width, "ring Gaussian width");
  cmd->add_option("--seed", f.spec.seed, "random seed");
}

struct SolverFlags {
  std::string dict = "starlet";
  int rank = 0;
  double kappa = 3.0;
  int k_max = 5;
  int j_max = 3;
  int n_scales = 0;
  int s_iters = 500;
  int alpha_iters = 500;
  int poly_degree = 2;
  double poly_ridge = 0.0;

  RcaConfig config(int m_d, bool least_squares) const
  {
    RcaConfig c;
    c.r_init = rank;
    c.kappa = kappa;
    c.k_max = k_max;
    c.j_max = j_max;
    c.n_scales = n_scales;
    c.s_max_iters = s_iters;
    c.alpha_max_iters = alpha_iters;
    c.m_d = m_d;
    c.dict_kind = dict == "pixel" ? DictionaryKind::Identity : DictionaryKind::Starlet2;
    if (least_squares) {
      c.weight_mode = WeightMode::LeastSquares;
      c.dict_kind = DictionaryKind::Identity;
    }
    return c;
  }
};

void add_solver_flags(CLI::App *cmd, SolverFlags &s)
{
  cmd->add_option("--dict", s.dict, "sparsity dictionary for rca")->check(CLI::IsMember({"pixel", "starlet"}));
  cmd->add_option("--rank", s.rank, "initial number of components (0: automatic)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--kappa", s.kappa, "threshold multiplier");
  cmd->add_option("--k-max", s.k_max, "outer iterations")->check(CLI::NonNegativeNumber);
  cmd->add_option("--j-max", s.j_max, "reweighting rounds")->check(CLI::NonNegativeNumber);
  cmd->add_option("--n-scales", s.n_scales, "starlet detail bands (0: default)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--s-iters", s.s_iters, "component-step iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--alpha-iters", s.alpha_iters, "code-step iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--poly-degree", s.poly_degree, "polynomial baseline degree")->check(CLI::NonNegativeNumber);
  cmd->add_option("--poly-ridge", s.poly_ridge, "polynomial baseline ridge")->check(CLI::NonNegativeNumber);
}

std::ofstream open_out(fs::path const &path)
{
  std::ofstream out(path);
  if (!out) { throw DataError("cannot write " + path.string()); }
  out << std::setprecision(17);
  return out;
}

json matrix_json(Matrix const &M)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) { row.push_back(M(i, j)); }
    rows.push_back(std::move(row));
  }
  return rows;
}

json shifts_json(std::vector<Shift> const &shifts)
{
  json a = json::array();
  for (auto const &s : shifts) { a.push_back({s.row, s.col}); }
  return a;
}

std::vector<Shift> read_shifts(fs::path const &path, int p)
{
  std::ifstream in(path);
  if (!in) { throw DataError("cannot read " + path.string()); }
  json j;
  try {
    in >> j;
  } catch (json::exception const &e) {
    throw DataError("malformed shift file " + path.string() + ": " + e.what());
  }
  if (!j.contains("shifts") || !j["shifts"].is_array() || static_cast<int>(j["shifts"].size()) != p) {
    throw DataError("shift file must list one shift per star");
  }
  std::vector<Shift> out;
  for (auto const &s : j["shifts"]) { out.push_back({s.at(0).get<double>(), s.at(1).get<double>()}); }
  return out;
}

struct Restored {
  PsfMatrix X_hat;
  std::optional<RcaResult> rca;
};

// method in {rca, rca-lsq, pca, poly}
Restored restore(ObservationStack const &stack, std::string const &method, int m_d, SolverFlags const &flags,
                 std::optional<std::vector<Shift>> const &shifts, std::ostream *log)
{
  Shape const hr{stack.patch_shape.rows * m_d, stack.patch_shape.cols * m_d};
  if (method == "pca") {
    if (m_d != 1) { throw UsageError("--method pca does not handle downsampling; use --md 1"); }
    int const r = flags.rank > 0 ? flags.rank : auto_rank(stack.Y, stack.noise_sigma);
    auto X = pca_denoise(stack.Y, r, hr);
    X.X = X.X.cwiseMax(0.0);
    return {X, std::nullopt};
  }
  if (method == "poly") {
    std::vector<Shift> const sh = shifts ? *shifts
                                         : (m_d == 1 ? std::vector<Shift>(stack.Y.cols()) : estimate_shifts(stack, m_d));
    auto const op = build_operator(sh, m_d, hr);
    auto fit = polynomial_field_fit(stack.Y, op, stack.positions, flags.poly_degree, flags.poly_ridge);
    fit.X.X = fit.X.X.cwiseMax(0.0);
    return {fit.X, std::nullopt};
  }
  RcaConfig cfg = flags.config(m_d, method == "rca-lsq");
  cfg.shifts = shifts;
  for (auto const &w : cfg.validate(stack.count())) { std::cerr << "warning: " << w << '\n'; }
  auto res = run_rca(stack, cfg, log);
  PsfMatrix X = res.X_hat;
  return {X, std::move(res)};
}

void save_psfs(PsfMatrix const &X, std::vector<Position> const &positions, fs::path const &path)
{
  save_dataset({X.X, positions, X.hr_shape, 0.0}, path);
}

int cmd_simulate(FieldFlags const &field, std::optional<double> snr, int m_d, fs::path const &out_dir)
{
  FieldSpec const spec = field.resolve();
  fs::create_directories(out_dir);
  auto const f = generate_field(spec);
  auto const d = degrade_field(f.truth, f.positions, m_d, snr, spec.seed + 1, m_d == 1);
  save_psfs(f.truth, f.positions, out_dir / "truth.rca");
  save_dataset(d.stack, out_dir / "observed.rca");
  json meta{{"command", g_command_line}, {"md", m_d}, {"noise_sigma", d.stack.noise_sigma},
            {"shifts", shifts_json(d.shifts)}};
  open_out(out_dir / "simulate.json") << meta.dump(1) << '\n';
  std::cout << "wrote " << (out_dir / "truth.rca").string() << " and " << (out_dir / "observed.rca").string() << '\n';
  return 0;
}

int cmd_restore(fs::path const &input, fs::path const &out_dir, std::string const &method, int m_d,
                SolverFlags const &flags, std::string const &shift_file, bool verbose)
{
  auto const stack = load_dataset(input);
  std::optional<std::vector<Shift>> shifts;
  if (!shift_file.empty()) { shifts = read_shifts(shift_file, stack.count()); }
  fs::create_directories(out_dir);
  auto const res = restore(stack, method, m_d, flags, shifts, verbose ? &std::cerr : nullptr);
  save_psfs(res.X_hat, stack.positions, out_dir / "estimate.rca");
  if (res.rca) {
    auto const &r = *res.rca;
    auto trace = open_out(out_dir / "trace.csv");
    trace << "# " << g_command_line << '\n';
    write_trace_csv(r.diagnostics, trace);
    json model{{"command", g_command_line},
               {"r_init", r.diagnostics.r_init},
               {"r_effective", r.diagnostics.r_effective},
               {"mu", r.diagnostics.mu},
               {"clamp_ratio", r.diagnostics.clamp_ratio},
               {"warnings", r.diagnostics.warnings},
               {"shifts", shifts_json(r.diagnostics.shifts)},
               {"S", matrix_json(r.model.S)},
               {"alpha", matrix_json(r.model.alpha)},
               {"V", matrix_json(r.model.V)},
               {"A", matrix_json(r.model.A)}};
    open_out(out_dir / "model.json") << model.dump() << '\n';
  }
  std::cout << "wrote " << (out_dir / "estimate.rca").string() << '\n';
  return 0;
}

int cmd_evaluate(fs::path const &truth_path, fs::path const &estimate_path, fs::path const &out_path)
{
  auto const t = load_dataset(truth_path);
  auto const e = load_dataset(estimate_path);
  auto const report = field_errors({t.Y, t.patch_shape}, {e.Y, e.patch_shape});
  auto out = open_out(out_path);
  out << "# " << g_command_line << '\n';
  write_shape_report_csv(report, out);
  std::cout << "E_gamma=" << report.E_gamma << " E_S=" << report.E_S << " NMSE=" << report.nmse << '\n';
  return 0;
}

int cmd_compare(FieldFlags const &field, std::vector<double> const &snrs, std::vector<std::string> const &methods,
                int m_d, SolverFlags const &flags, fs::path const &out_path)
{
  for (auto const &m : methods) {
    if (m == "pca" && m_d != 1) { throw UsageError("--method pca does not handle downsampling; use --md 1"); }
  }
  FieldSpec const spec = field.resolve();
  auto const f = generate_field(spec);
  auto out = open_out(out_path);
  out << "# " << g_command_line << '\n';
  out << "snr,method,E_gamma,B_gamma,E_S,sigma_S,MSE,NMSE,r_effective\n";
  for (double snr : snrs) {
    auto const d = degrade_field(f.truth, f.positions, m_d, snr, spec.seed + 1, m_d == 1);
    for (auto const &method : methods) {
      auto const t0 = std::chrono::steady_clock::now();
      auto const res = restore(d.stack, method, m_d, flags, std::nullopt, nullptr);
      double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      auto const rep = field_errors(f.truth, res.X_hat);
      out << snr << ',' << method << ',' << rep.E_gamma << ',' << rep.B_gamma << ',' << rep.E_S << ',' << rep.sigma_S
          << ',' << rep.mse << ',' << rep.nmse << ',' << (res.rca ? res.rca->diagnostics.r_effective : 0) << '\n';
      std::cerr << "snr=" << snr << " method=" << method << " E_gamma=" << rep.E_gamma << " E_S=" << rep.E_S
                << " (" << secs << " s)\n";
    }
  }
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  {
    std::ostringstream cl;
    cl << "rca_cli";
    for (int i = 1; i < argc; ++i) { cl << ' ' << argv[i]; }
    g_command_line = cl.str();
  }

  CLI::App app{"PSF field restoration with resolved components"};
  app.set_config("--config", "", "INI or TOML file, subcommand options under [simulate], [restore], ...; command-line flags take precedence");
  app.require_subcommand(1);
  std::vector<std::string> const method_names{"rca", "rca-lsq", "pca", "poly"};

  auto *sim = app.add_subcommand("simulate", "generate a synthetic field and its degraded observation");
  FieldFlags sim_field;
  std::optional<double> sim_snr;
  int sim_md = 1;
  std::string sim_out;
  add_field_flags(sim, sim_field);
  sim->add_option("--snr", sim_snr, "target SNR (omit for a noiseless observation)")->check(CLI::PositiveNumber);
  sim->add_option("--md", sim_md, "downsampling factor")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "output directory")->required();

  auto *rst = app.add_subcommand("restore", "estimate the high-resolution PSFs from an observation");
  std::string rst_in;
  std::string rst_out;
  std::string rst_method = "rca";
  std::string rst_shifts;
  int rst_md = 1;
  bool rst_verbose = false;
  SolverFlags rst_flags;
  rst->add_option("--input", rst_in, "observed dataset")->required()->check(CLI::ExistingFile);
  rst->add_option("--out", rst_out, "output directory")->required();
  rst->add_option("--method", rst_method, "restoration method")->check(CLI::IsMember(method_names));
  rst->add_option("--md", rst_md, "upsampling factor")->check(CLI::PositiveNumber);
  rst->add_option("--shifts", rst_shifts, "JSON file with a \"shifts\" array (default: estimated)")
      ->check(CLI::ExistingFile);
  rst->add_flag("--verbose", rst_verbose, "log solver progress to stderr");
  add_solver_flags(rst, rst_flags);

  auto *ev = app.add_subcommand("evaluate", "shape and error metrics of an estimate against the truth");
  std::string ev_truth;
  std::string ev_est;
  std::string ev_out;
  ev->add_option("--truth", ev_truth, "truth dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--estimate", ev_est, "estimated dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "metrics CSV")->required();

  auto *cmp = app.add_subcommand("compare", "simulate, restore and evaluate over SNRs and methods");
  FieldFlags cmp_field;
  std::vector<double> cmp_snr{10.0, 40.0};
  std::vector<std::string> cmp_methods{"rca", "pca"};
  int cmp_md = 1;
  std::string cmp_out;
  SolverFlags cmp_flags;
  add_field_flags(cmp, cmp_field);
  cmp->add_option("--snr", cmp_snr, "SNR values")->delimiter(',')->check(CLI::PositiveNumber);
  cmp->add_option("--methods", cmp_methods, "methods")->delimiter(',')->check(CLI::IsMember(method_names));
  cmp->add_option("--md", cmp_md, "downsampling factor")->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "sweep CSV")->required();
  add_solver_flags(cmp, cmp_flags);

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) { return cmd_simulate(sim_field, sim_snr, sim_md, sim_out); }
    if (*rst) { return cmd_restore(rst_in, rst_out, rst_method, rst_md, rst_flags, rst_shifts, rst_verbose); }
    if (*ev) { return cmd_evaluate(ev_truth, ev_est, ev_out); }
    if (*cmp) { return cmd_compare(cmp_field, cmp_snr, cmp_methods, cmp_md, cmp_flags, cmp_out); }
  } catch (UsageError const &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (DataError const &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (SolverError const &e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 4;
  } catch (fs::filesystem_error const &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
