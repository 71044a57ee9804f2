// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: benchmark generation, offline basis
// construction, single optimizations and full campaigns.

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "dampopt/bench.hpp"
#include "dampopt/optimize.hpp"
#include "dampopt/response.hpp"
#include "dampopt/serialize.hpp"

namespace {

using namespace dampopt;

std::string resolve_out(const std::string& path) {
  const char* dir = std::getenv("DAMPOPT_OUT_DIR");
  if (!dir || *dir == '\0' || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(dir) / path).string();
}

int env_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("DAMPOPT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

Vector parse_gains(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Family parse_family(const std::string& name) {
  if (name == "example1") return Family::example1;
  if (name == "example2") return Family::example2;
  throw CLI::ValidationError("--family", "expected example1 or example2");
}

struct SignFlags {
  double tol = 1e-6;
  int iter_max = 10;
  double trunc_tol = 1e-8;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sign-tol", tol, "sign iteration stopping tolerance on |A_k+I|_F^2");
    cmd->add_option("--sign-iter-max", iter_max, "maximum sign iterations");
    cmd->add_option("--trunc-tol", trunc_tol, "relative column-compression drop tolerance");
  }
  SignSolveOptions options() const {
    SignSolveOptions s;
    s.tol = tol;
    s.iter_max = iter_max;
    s.trunc_tol = trunc_tol;
    return s;
  }
};

DampingParameter start_or_default(const std::string& csv, Eigen::Index num_gains, double value) {
  if (!csv.empty()) return DampingParameter(parse_gains(csv));
  return constant_parameter(num_gains, value);
}

int cmd_generate(const std::string& family_name, int n, int d, double alpha, double stiffness,
                 int config_index, const std::string& out) {
  Family family = parse_family(family_name);
  BenchmarkOverrides o;
  if (alpha > 0.0) o.alpha = alpha;
  if (stiffness > 0.0) o.stiffness = stiffness;
  const int scale = family == Family::example1 ? n : d;
  if (scale <= 0) throw CLI::ValidationError("--n/--d", "scale must be set for the chosen family");
  auto configs = family == Family::example1 ? example1_configs(scale) : example2_configs(scale);
  if (config_index < 1 || config_index > static_cast<int>(configs.size()))
    throw CLI::ValidationError("--config-index", "outside the configuration list");
  o.damper_positions = configs[static_cast<std::size_t>(config_index - 1)];
  SecondOrderSystem sys = family == Family::example1 ? example1_system(scale, o)
                                                     : example2_system(scale, o);
  const std::string path = resolve_out(out);
  save_system(sys, path);
  std::cout << "wrote " << path << "\n"
            << "n = " << sys.n() << ", dampers = " << sys.num_dampers()
            << ", gains = " << sys.num_gains() << "\nbounds:";
  for (const auto& b : sys.bounds()) std::cout << " [" << b.lower << ", " << b.upper << "]";
  std::cout << "\nconfig " << config_index << " at positions (" << o.damper_positions->first
            << ", " << o.damper_positions->second << ")\n";
  return 0;
}

int cmd_offline(const std::string& system_path, int grid, double tol_f, const SignFlags& sign,
                const std::string& g0_csv, const std::string& g0rr_csv,
                const std::string& resume_path, const std::string& out) {
  SecondOrderSystem sys = load_system(system_path);
  ModalRealization modal = modal_transform(sys);
  if (grid <= 0) grid = sys.num_gains() == 2 ? 36 : 21;
  auto test_grid = uniform_test_grid(sys.bounds(), grid);

  OfflineOptions opts;
  opts.tol_f = tol_f;
  opts.sign = sign.options();
  if (!g0_csv.empty()) opts.g0 = DampingParameter(parse_gains(g0_csv));
  opts.g0rr = start_or_default(g0rr_csv, sys.num_gains(), 100.0);
  ReducedBasis resume;
  if (!resume_path.empty()) {
    resume = load_basis(resume_path);
    opts.resume = &resume;
  }
  opts.observer = [](const OfflineIterate& it) {
    std::cout << "  enrichment " << it.iteration << ": r = " << it.basis.r()
              << ", r_err = " << it.basis.re() << ", max estimate = " << it.delta_max << "\n";
  };

  const auto t0 = std::chrono::steady_clock::now();
  OfflineResult result = offline_rbm(modal, test_grid, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string path = resolve_out(out);
  save_basis(result.basis, path);
  std::cout << "offline phase " << (result.converged ? "converged" : "did NOT converge")
            << " after " << result.enrichments << " enrichments in " << secs << " s\n"
            << "r = " << result.basis.r() << ", r_err = " << result.basis.re()
            << ", final max estimate = " << result.final_delta_max << "\nwrote " << path << "\n";
  return result.converged ? 0 : 1;
}

int cmd_optimize(const std::string& system_path, const std::string& method_str,
                 const std::string& basis_path, const std::string& g0_csv, double opt_tol,
                 double tol_f, const SignFlags& sign, int grid, const std::string& csv_out) {
  SecondOrderSystem sys = load_system(system_path);
  ModalRealization modal = modal_transform(sys);
  auto method = method_from_name(method_str);
  if (!method) throw CLI::ValidationError("--method", "expected exact, rbm or adaptive");

  DampingParameter g0 = start_or_default(g0_csv, sys.num_gains(), 1000.0);
  DampingParameter g0rr = constant_parameter(sys.num_gains(), 100.0);
  if (grid <= 0) grid = sys.num_gains() == 2 ? 36 : 21;

  OptimizeOptions opts;
  opts.opt_tol = opt_tol;
  opts.tol_f = tol_f;
  opts.basis_sign = sign.options();

  OptimizationOutcome outcome;
  int basis_r = -1, basis_re = -1;
  const auto t0 = std::chrono::steady_clock::now();
  switch (*method) {
    case Method::exact:
      outcome = optimize_exact(modal, g0, opts);
      break;
    case Method::rbm: {
      ReducedBasis basis;
      if (!basis_path.empty()) {
        basis = load_basis(basis_path);
      } else {
        OfflineOptions off;
        off.tol_f = tol_f;
        off.sign = opts.basis_sign;
        off.g0 = clamp_to_box(g0, sys.bounds());
        off.g0rr = g0rr;
        basis = offline_rbm(modal, uniform_test_grid(sys.bounds(), grid), off).basis;
      }
      outcome = optimize_reduced(modal, basis, g0, opts);
      basis_r = static_cast<int>(basis.r());
      basis_re = static_cast<int>(basis.re());
      break;
    }
    case Method::adaptive:
      outcome = adaptive_rbm_optimize(modal, g0, g0rr,
                                      uniform_test_grid(sys.bounds(), grid), opts);
      break;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::cout << method_str << " optimization "
            << (outcome.converged ? "converged" : "did NOT converge") << " in " << secs
            << " s after " << outcome.evals << " evaluations\n";
  std::cout << "g_opt =";
  for (Eigen::Index i = 0; i < outcome.g_opt.size(); ++i) std::cout << ' ' << outcome.g_opt[i];
  std::cout << "\nJ = " << outcome.J_opt.value << " (J^2 = " << outcome.J_opt.squared << ")\n";
  if (outcome.restarts > 0) std::cout << "restarts = " << outcome.restarts << "\n";

  if (!csv_out.empty()) {
    CampaignResult cr;
    cr.num_gains = sys.num_gains();
    ConfigResult row;
    row.config_id = 1;
    row.method = *method;
    row.g_opt = outcome.g_opt.values;
    row.J_opt = outcome.J_opt.value;
    row.wall_time_s = secs;
    row.basis_r = basis_r;
    row.basis_re = basis_re;
    row.restarts = outcome.restarts;
    row.status = outcome.converged ? "ok" : "not-converged";
    if (!outcome.basis_sizes.empty()) {
      row.basis_r = outcome.basis_sizes.back().first;
      row.basis_re = outcome.basis_sizes.back().second;
    }
    cr.rows.push_back(row);
    std::ofstream os(resolve_out(csv_out));
    write_campaign_csv(os, cr);
  }
  return outcome.converged ? 0 : 1;
}

int cmd_campaign(const std::string& family_name, int scale, const std::string& methods_csv,
                 const std::string& configs_csv, double tol_f, double opt_tol, int grid,
                 const SignFlags& sign, int threads, const std::string& out_dir) {
  CampaignSpec spec;
  spec.family = parse_family(family_name);
  spec.scale = scale;
  spec.grid_size = grid;
  spec.tol_f = tol_f;
  spec.opt_tol = opt_tol;
  spec.basis_sign = sign.options();

  std::vector<Method> methods;
  {
    std::stringstream ss(methods_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      auto m = method_from_name(cell);
      if (!m) throw CLI::ValidationError("--methods", "unknown method: " + cell);
      methods.push_back(*m);
    }
  }
  if (methods.empty()) throw CLI::ValidationError("--methods", "at least one method required");
  if (!configs_csv.empty()) {
    std::stringstream ss(configs_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) spec.config_filter.push_back(std::stoi(cell));
  }

  CampaignResult result = run_campaign(spec, methods, env_threads(threads));

  const std::filesystem::path dir = resolve_out(out_dir);
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / "results.csv";
  std::ofstream os(csv_path);
  write_campaign_csv(os, result);
  std::cout << "wrote " << csv_path.string() << " (" << result.rows.size() << " rows)\n";

  bool all_ok = true;
  for (const auto& row : result.rows) {
    if (row.status != "ok") all_ok = false;
    std::cout << "config " << row.config_id << " [" << method_name(row.method) << "] J = "
              << row.J_opt << " time = " << row.wall_time_s << " s status = " << row.status
              << "\n";
  }
  return all_ok ? 0 : 1;
}

int cmd_verify(int scale) {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  // modal identities on both benchmark families
  {
    SecondOrderSystem sys = example1_system(scale);
    ModalRealization modal = modal_transform(sys);
    Matrix D = build_internal_damping(sys.M(), sys.K(), sys.alpha());
    const double e1 = (modal.Phi.transpose() * sys.M() * modal.Phi -
                       Matrix::Identity(sys.n(), sys.n())).norm();
    const double e2 = (modal.Phi.transpose() * sys.K() * modal.Phi -
                       Matrix(modal.Omega.array().square().matrix().asDiagonal())).norm();
    const double e3 = (modal.Phi.transpose() * D * modal.Phi -
                       Matrix(2.0 * sys.alpha() * modal.Omega.asDiagonal())).norm();
    report("modal identities (example 1)",
           e1 <= 1e-9 * sys.n() && e2 <= 1e-9 * sys.K().norm() && e3 <= 1e-9 * D.norm());
  }
  // sign solver against the dense oracle on random structured systems
  {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> gain(1e2, 1e4);
    bool ok = true;
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 6 + trial;
      Vector omega(n);
      for (int i = 0; i < n; ++i) omega[i] = 0.5 + 0.3 * i + 0.01 * trial;
      Matrix Fm = Matrix::Random(n, 2);
      Vector gains(2);
      gains << gain(rng), gain(rng);
      Fm *= 0.05;
      StructuredStateOperator op(omega, 0.02, Fm, gains);
      Matrix Bm = Matrix::Random(n, 2);
      Matrix B = lift_input(Bm);
      LowRankFactor Z = sign_solve(op, B, oracle_sign_options());
      Matrix P = solve_dense(op.dense(), B * B.transpose());
      ok = ok && (Z.Z * Z.Z.transpose() - P).norm() <= 1e-6 * P.norm();
    }
    report("sign solver matches dense oracle", ok);
  }
  // energy response against the quadrature oracle
  {
    SecondOrderSystem sys = example1_system(40);
    ModalRealization modal = modal_transform(sys);
    DampingParameter g({1500.0, 2500.0});
    const double exact = exact_energy_response(modal, g).squared;
    const double quad = quadrature_energy_response(modal, g).squared;
    report("energy response cross-check", std::abs(exact - quad) <= 1e-3 * exact);
  }
  std::cout << (failures == 0 ? "verification passed\n" : "verification FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-active damping optimization via reduced basis Lyapunov solvers"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a benchmark system file");
  std::string gen_family = "example1", gen_out = "system.json";
  int gen_n = 0, gen_d = 0, gen_config = 1;
  double gen_alpha = 0.0, gen_stiffness = 0.0;
  gen->add_option("--family", gen_family, "example1 or example2")->required();
  gen->add_option("--n", gen_n, "dimension for example 1");
  gen->add_option("--d", gen_d, "line length for example 2 (n = 2d+1)");
  gen->add_option("--alpha", gen_alpha, "internal damping scale override");
  gen->add_option("--stiffness", gen_stiffness, "uniform spring constant override (example 1)");
  gen->add_option("--config-index", gen_config, "damping configuration id (1-based)");
  gen->add_option("--out", gen_out, "output path")->required();

  // offline
  auto* off = app.add_subcommand("offline", "build the reduced bases (offline phase)");
  std::string off_system, off_out = "basis.bin", off_g0, off_g0rr, off_resume;
  int off_grid = 0;
  double off_tolf = 1e-3;
  SignFlags off_sign;
  off->add_option("--system", off_system, "system file")->required();
  off->add_option("--grid", off_grid, "test grid size (default 36 for 2 gains, 21 for 4)");
  off->add_option("--tol-f", off_tolf, "estimator tolerance");
  off->add_option("--g0", off_g0, "start parameter, comma separated");
  off->add_option("--g0rr", off_g0rr, "error-basis start parameter, comma separated");
  off->add_option("--resume", off_resume, "existing basis checkpoint to continue from");
  off->add_option("--out", off_out, "basis checkpoint path");
  off_sign.attach(off);

  // optimize
  auto* opt = app.add_subcommand("optimize", "optimize gains for one system");
  std::string opt_system, opt_method = "exact", opt_basis, opt_g0, opt_csv;
  double opt_tol = 1e-4, opt_tolf = 1e-3;
  int opt_grid = 0;
  SignFlags opt_sign;
  opt->add_option("--system", opt_system, "system file")->required();
  opt->add_option("--method", opt_method, "exact, rbm or adaptive")->required();
  opt->add_option("--basis", opt_basis, "basis checkpoint (rbm)");
  opt->add_option("--g0", opt_g0, "start gains, comma separated");
  opt->add_option("--opt-tol", opt_tol, "optimizer tolerance");
  opt->add_option("--tol-f", opt_tolf, "estimator tolerance");
  opt->add_option("--grid", opt_grid, "test grid size");
  opt->add_option("--csv", opt_csv, "also append a CSV row here");
  opt_sign.attach(opt);

  // campaign
  auto* cam = app.add_subcommand("campaign", "run every damping configuration");
  std::string cam_family = "example1", cam_methods = "exact,rbm,adaptive", cam_configs,
              cam_out = "campaign";
  int cam_scale = 190, cam_grid = 0, cam_threads = 0;
  double cam_tolf = 0.0, cam_opt_tol = 0.0;
  SignFlags cam_sign;
  cam->add_option("--family", cam_family, "example1 or example2")->required();
  cam->add_option("--scale", cam_scale, "n for example 1, d for example 2")->required();
  cam->add_option("--methods", cam_methods, "comma separated subset of exact,rbm,adaptive");
  cam->add_option("--configs", cam_configs, "comma separated 1-based configuration ids");
  cam->add_option("--tol-f", cam_tolf, "estimator tolerance (0: family default)");
  cam->add_option("--opt-tol", cam_opt_tol, "optimizer tolerance (0: family default)");
  cam->add_option("--grid", cam_grid, "test grid size (0: family default)");
  cam->add_option("--threads", cam_threads, "worker threads (0: env/auto)");
  cam->add_option("--out", cam_out, "output directory");
  cam_sign.attach(cam);

  // verify
  auto* ver = app.add_subcommand("verify", "run the built-in property checks");
  int ver_scale = 190;
  ver->add_option("--scale", ver_scale, "example 1 scale used by the checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(gen_family, gen_n, gen_d, gen_alpha, gen_stiffness, gen_config, gen_out);
    if (off->parsed())
      return cmd_offline(off_system, off_grid, off_tolf, off_sign, off_g0, off_g0rr, off_resume,
                         off_out);
    if (opt->parsed())
      return cmd_optimize(opt_system, opt_method, opt_basis, opt_g0, opt_tol, opt_tolf, opt_sign,
                          opt_grid, opt_csv);
    if (cam->parsed())
      return cmd_campaign(cam_family, cam_scale, cam_methods, cam_configs, cam_tolf, cam_opt_tol,
                          cam_grid, cam_sign, cam_threads, cam_out);
    if (ver->parsed()) return cmd_verify(ver_scale);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
