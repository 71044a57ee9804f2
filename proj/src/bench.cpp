// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "dampopt/rbm.hpp"

namespace dampopt {
namespace {

long scale_index(long index, long from_scale, long to_scale) {
  return std::lround(static_cast<double>(index) * static_cast<double>(to_scale) /
                     static_cast<double>(from_scale));
}

double halton(long i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<std::pair<int, int>> example1_configs(int n) {
  const std::vector<int> js_ref = {50, 150, 250, 350};
  std::vector<int> ks_ref;
  for (int k = 850; k <= 1850; k += 100) ks_ref.push_back(k);
  std::vector<std::pair<int, int>> configs;
  for (int j : js_ref)
    for (int k : ks_ref) {
      int js = static_cast<int>(scale_index(j, 1900, n));
      int ks = static_cast<int>(scale_index(k, 1900, n));
      js = std::clamp(js, 1, n - 1);
      ks = std::clamp(ks, 1, n - 1);
      configs.emplace_back(js, ks);
    }
  return configs;
}

SecondOrderSystem example1_system(int n, const BenchmarkOverrides& overrides) {
  if (n < 40) throw Error("example1_system: scale too small, need n >= 40");
  const double k = overrides.stiffness.value_or(500.0);
  const double alpha = overrides.alpha.value_or(0.005);

  Matrix M = Matrix::Zero(n, n);
  const int breakpoint = (n + 3) / 4;  // ceil(n/4)
  for (int j = 1; j <= n; ++j) {
    const double m = (j <= breakpoint) ? 144.0 - 0.15 * j : j / 10.0 + 25.0;
    if (m <= 0.0) throw Error("example1_system: mass law produces a nonpositive mass at this scale");
    M(j - 1, j - 1) = m;
  }

  Matrix K = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = 4.0 * k;
    if (i + 1 < n) K(i, i + 1) = K(i + 1, i) = -k;
    if (i + 2 < n) K(i, i + 2) = K(i + 2, i) = -k;
  }

  const int b_start = static_cast<int>(scale_index(471, 1900, n));
  if (b_start < 1 || b_start + 9 > n)
    throw Error("example1_system: scale too small to host the input block");
  Matrix B = Matrix::Zero(n, 10);
  const double weights[10] = {10, 20, 30, 40, 50, 50, 40, 30, 20, 10};
  for (int i = 0; i < 10; ++i) B(b_start - 1 + i, i) = weights[i];

  const int step = n / 19;
  if (step < 1 || 18 * step > n) throw Error("example1_system: scale too small for the output taps");
  Matrix C = Matrix::Zero(18, n);
  for (int i = 0; i < 18; ++i) C(i, (i + 1) * step - 1) = 1.0;

  auto [dj, dk] = overrides.damper_positions.value_or(example1_configs(n).front());
  if (dj < 1 || dj + 1 > n || dk < 1 || dk + 1 > n)
    throw Error("example1_system: damper positions outside the chain");
  Matrix F = Matrix::Zero(n, 4);
  F(dj - 1, 0) = 1.0;
  F(dj, 1) = 1.0;
  F(dk - 1, 2) = 1.0;
  F(dk, 3) = 1.0;

  const GainBounds gb = overrides.gain_bounds.value_or(GainBounds{500.0, 4000.0});
  BoundsBox bounds = {gb, gb};
  return SecondOrderSystem(std::move(M), std::move(K), alpha, std::move(B), std::move(C),
                           std::move(F), std::move(bounds), {0, 0, 1, 1});
}

std::vector<std::pair<int, int>> example2_configs(int d) {
  const std::vector<int> js_ref = {250, 450, 650, 850};
  std::vector<int> ks_ref;
  for (int k = 1150; k <= 1750; k += 100) ks_ref.push_back(k);
  std::vector<std::pair<int, int>> configs;
  for (int j : js_ref)
    for (int k : ks_ref) {
      int js = static_cast<int>(scale_index(j, 1000, d));
      int ks = static_cast<int>(scale_index(k, 1000, d));
      js = std::clamp(js, 1, std::max(1, d - 25));
      ks = std::clamp(ks, d + 1, std::max(d + 1, 2 * d - 25));
      configs.emplace_back(js, ks);
    }
  return configs;
}

SecondOrderSystem example2_system(int d, const BenchmarkOverrides& overrides) {
  if (d < 30) throw Error("example2_system: scale too small, need d >= 30");
  const int n = 2 * d + 1;
  const double k1 = overrides.k1.value_or(400.0);
  const double k2 = overrides.k2.value_or(100.0);
  const double k3 = overrides.k3.value_or(300.0);
  const double alpha = overrides.alpha.value_or(0.003);

  Matrix M = Matrix::Zero(n, n);
  const int half = (d + 1) / 2;  // ceil(d/2)
  for (int j = 1; j <= 2 * d; ++j) {
    double m;
    if (j <= half)
      m = 100.0 - j / 10.0;
    else if (j <= d)
      m = j / 30.0 + 33.0;
    else {
      const double s = static_cast<double>(j - (d - 1));
      m = 100.0 - s * 0.25 + s * s / 5000.0;
    }
    if (m <= 0.0) throw Error("example2_system: mass law produces a nonpositive mass at this scale");
    M(j - 1, j - 1) = m;
  }
  M(n - 1, n - 1) = 100.0;

  Matrix K = Matrix::Zero(n, n);
  auto fill_chain = [&](int offset, double kc) {
    for (int i = 0; i < d; ++i) {
      K(offset + i, offset + i) = 2.0 * kc;
      if (i + 1 < d) K(offset + i, offset + i + 1) = K(offset + i + 1, offset + i) = -kc;
    }
  };
  fill_chain(0, k1);
  fill_chain(d, k2);
  K(d - 1, n - 1) = K(n - 1, d - 1) = k1;
  K(2 * d - 1, n - 1) = K(n - 1, 2 * d - 1) = k2;
  K(n - 1, n - 1) = k1 + k2 + k3;

  Matrix B = Matrix::Zero(n, 21);
  for (int i = 0; i < 10; ++i) {
    B(i, i) = 1000.0 - 100.0 * i;
    B(d + i, 10 + i) = 1000.0 - 100.0 * i;
  }
  B(n - 1, 20) = 2000.0;

  const int c1 = static_cast<int>(scale_index(500, 1000, d)) - 10;
  const int c2 = d + static_cast<int>(scale_index(500, 1000, d)) - 10;
  if (c1 < 1 || c2 + 20 > 2 * d) throw Error("example2_system: scale too small for the output windows");
  Matrix C = Matrix::Zero(42, n);
  for (int i = 0; i < 21; ++i) {
    C(i, c1 - 1 + i) = 1.0;
    C(21 + i, c2 - 1 + i) = 1.0;
  }

  auto [dj, dk] = overrides.damper_positions.value_or(example2_configs(d).front());
  if (dj < 1 || dj + 25 > d || dk <= d || dk + 25 > 2 * d)
    throw Error("example2_system: damper positions outside the chains");
  Matrix F = Matrix::Zero(n, 4);
  auto relative_column = [&](int col, int a, int b) {
    F(a - 1, col) = 1.0;
    F(b - 1, col) = -1.0;
  };
  relative_column(0, dj, dj + 5);
  relative_column(1, dj + 20, dj + 25);
  relative_column(2, dk, dk + 5);
  relative_column(3, dk + 20, dk + 25);

  const GainBounds gb = overrides.gain_bounds.value_or(GainBounds{350.0, 7000.0});
  BoundsBox bounds = {gb, gb, gb, gb};
  return SecondOrderSystem(std::move(M), std::move(K), alpha, std::move(B), std::move(C),
                           std::move(F), std::move(bounds));
}

std::vector<DampingParameter> uniform_test_grid(const BoundsBox& box, int count) {
  const int dim = static_cast<int>(box.size());
  if (dim == 0 || count < 1) throw Error("uniform_test_grid: invalid request");
  std::vector<DampingParameter> grid;
  grid.reserve(static_cast<std::size_t>(count));
  const int per_dim = static_cast<int>(std::lround(std::pow(count, 1.0 / dim)));
  const bool lattice = per_dim >= 2 && std::pow(per_dim, dim) == count;
  if (lattice) {
    for (int idx = 0; idx < count; ++idx) {
      Vector g(dim);
      int rem = idx;
      for (int dgt = dim - 1; dgt >= 0; --dgt) {
        const int digit = rem % per_dim;
        rem /= per_dim;
        const auto& b = box[static_cast<std::size_t>(dgt)];
        g[dgt] = b.lower + digit * (b.upper - b.lower) / (per_dim - 1);
      }
      grid.emplace_back(g);
    }
  } else {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    if (dim > 8) throw Error("uniform_test_grid: dimension too large for the Halton bases");
    for (int i = 1; i <= count; ++i) {
      Vector g(dim);
      for (int dgt = 0; dgt < dim; ++dgt) {
        const auto& b = box[static_cast<std::size_t>(dgt)];
        g[dgt] = b.lower + halton(i, primes[dgt]) * (b.upper - b.lower);
      }
      grid.emplace_back(g);
    }
  }
  return grid;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::exact: return "exact";
    case Method::rbm: return "rbm";
    case Method::adaptive: return "adaptive";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "exact") return Method::exact;
  if (name == "rbm") return Method::rbm;
  if (name == "adaptive") return Method::adaptive;
  return std::nullopt;
}

double default_tol_f(Family f) { return f == Family::example1 ? 1e-3 : 1e-2; }
double default_opt_tol(Family f) { return f == Family::example1 ? 1e-4 : 5e-4; }
int default_grid_size(Family f) { return f == Family::example1 ? 36 : 21; }

DampingParameter default_start(Family f) {
  return constant_parameter(f == Family::example1 ? 2 : 4, 1000.0);
}

DampingParameter default_residual_start(Family f) {
  return constant_parameter(f == Family::example1 ? 2 : 4, 100.0);
}

CampaignResult run_campaign(const CampaignSpec& spec, const std::vector<Method>& methods,
                            int threads) {
  const double tol_f = spec.tol_f > 0.0 ? spec.tol_f : default_tol_f(spec.family);
  const double opt_tol = spec.opt_tol > 0.0 ? spec.opt_tol : default_opt_tol(spec.family);
  const int grid_size = spec.grid_size > 0 ? spec.grid_size : default_grid_size(spec.family);

  auto build_system = [&](std::pair<int, int> cfg) {
    BenchmarkOverrides o = spec.overrides;
    o.damper_positions = cfg;
    return spec.family == Family::example1 ? example1_system(spec.scale, o)
                                           : example2_system(spec.scale, o);
  };
  std::vector<std::pair<int, int>> all_configs = spec.family == Family::example1
                                                     ? example1_configs(spec.scale)
                                                     : example2_configs(spec.scale);
  std::vector<int> ids;
  if (spec.config_filter.empty()) {
    ids.resize(all_configs.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
  } else {
    for (int id : spec.config_filter) {
      if (id < 1 || id > static_cast<int>(all_configs.size()))
        throw Error("run_campaign: config id out of range");
      ids.push_back(id);
    }
  }

  // M, K, alpha are shared by every configuration; only F changes.
  SecondOrderSystem base = build_system(all_configs[static_cast<std::size_t>(ids.front() - 1)]);
  ModalRealization modal_base = modal_transform(base);
  const std::vector<DampingParameter> test_grid = uniform_test_grid(base.bounds(), grid_size);
  const DampingParameter g0 = default_start(spec.family);
  const DampingParameter g0rr = default_residual_start(spec.family);

  // Shared undamped solve, excluded from the per-method timings.
  Matrix Z0 = solve_undamped_position_factor(modal_base, spec.basis_sign);

  CampaignResult result;
  result.num_gains = base.num_gains();
  result.rows.resize(ids.size() * methods.size());

  auto run_config = [&](std::size_t task) {
    const int config_id = ids[task];
    const auto cfg = all_configs[static_cast<std::size_t>(config_id - 1)];
    ModalRealization modal = modal_base;
    {
      BenchmarkOverrides o = spec.overrides;
      o.damper_positions = cfg;
      SecondOrderSystem sys = build_system(cfg);
      modal.Fm = modal.Phi.transpose() * sys.F();
      modal.gain_map = sys.gain_map();
      modal.bounds = sys.bounds();
    }

    std::optional<Vector> exact_gains;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      ConfigResult row;
      row.config_id = config_id;
      row.j = cfg.first;
      row.k = cfg.second;
      row.method = methods[mi];
      row.g_opt = Vector::Zero(modal.num_gains());
      try {
        OptimizeOptions oopts;
        oopts.opt_tol = opt_tol;
        oopts.tol_f = tol_f;
        oopts.max_evals = spec.max_evals;
        oopts.exact_sign = spec.exact_sign;
        oopts.basis_sign = spec.basis_sign;
        oopts.undamped_z1 = &Z0;
        oopts.dense_cap = spec.dense_cap;
        const auto t0 = std::chrono::steady_clock::now();
        OptimizationOutcome outcome;
        switch (methods[mi]) {
          case Method::exact:
            outcome = optimize_exact(modal, g0, oopts);
            break;
          case Method::rbm: {
            OfflineOptions off;
            off.tol_f = tol_f;
            off.sign = spec.basis_sign;
            off.g0 = clamp_to_box(g0, modal.bounds);
            off.g0rr = g0rr;
            off.undamped_z1 = &Z0;
            OfflineResult offline = offline_rbm(modal, test_grid, off);
            outcome = optimize_reduced(modal, offline.basis, g0, oopts);
            outcome.converged = outcome.converged && offline.converged;
            break;
          }
          case Method::adaptive:
            outcome = adaptive_rbm_optimize(modal, g0, g0rr, test_grid, oopts);
            break;
        }
        row.wall_time_s = seconds_since(t0);
        row.g_opt = outcome.g_opt.values;
        row.J_opt = outcome.J_opt.value;
        row.restarts = outcome.restarts;
        if (!outcome.basis_sizes.empty()) {
          row.basis_r = outcome.basis_sizes.back().first;
          row.basis_re = outcome.basis_sizes.back().second;
        }
        row.status = outcome.converged ? "ok" : "not-converged";
        if (methods[mi] == Method::exact) exact_gains = row.g_opt;
      } catch (const std::exception& e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), ',', ';');
        row.status = "error: " + what;
      }
      result.rows[task * methods.size() + mi] = std::move(row);
    }
    if (exact_gains) {
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        ConfigResult& row = result.rows[task * methods.size() + mi];
        if (row.method != Method::exact && row.status.rfind("error", 0) != 0)
          row.rel_gain_err = (row.g_opt - *exact_gains).norm() / exact_gains->norm();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(ids.size())));
  if (workers == 1) {
    for (std::size_t t = 0; t < ids.size(); ++t) run_config(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t t = next.fetch_add(1);
          if (t >= ids.size()) break;
          run_config(t);
        }
      });
    for (auto& th : pool) th.join();
  }
  return result;
}

void write_campaign_csv(std::ostream& os, const CampaignResult& result) {
  os << "config_id,j,k,method";
  for (Eigen::Index i = 1; i <= result.num_gains; ++i) os << ",g_opt_" << i;
  os << ",J_opt,rel_gain_err,wall_time_s,basis_r,basis_re,restarts,status\n";
  for (const auto& row : result.rows) {
    os << row.config_id << ',' << row.j << ',' << row.k << ',' << method_name(row.method);
    for (Eigen::Index i = 0; i < result.num_gains; ++i)
      os << ',' << (i < row.g_opt.size() ? format_double(row.g_opt[i]) : std::string());
    os << ',' << format_double(row.J_opt);
    os << ',' << (row.rel_gain_err ? format_double(*row.rel_gain_err) : std::string());
    os << ',' << format_double(row.wall_time_s);
    os << ',' << (row.basis_r >= 0 ? std::to_string(row.basis_r) : std::string());
    os << ',' << (row.basis_re >= 0 ? std::to_string(row.basis_re) : std::string());
    os << ',' << row.restarts;
    os << ',' << row.status << '\n';
  }
}

CampaignResult parse_campaign_csv(std::istream& is) {
  CampaignResult result;
  std::string line;
  if (!std::getline(is, line)) throw IoError("campaign csv: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  Eigen::Index num_gains = 0;
  for (const auto& h : header)
    if (h.rfind("g_opt_", 0) == 0) ++num_gains;
  result.num_gains = num_gains;
  const std::size_t expected = header.size();

  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < expected) cells.emplace_back();
    ConfigResult row;
    std::size_t c = 0;
    row.config_id = std::stoi(cells[c++]);
    row.j = std::stoi(cells[c++]);
    row.k = std::stoi(cells[c++]);
    auto m = method_from_name(cells[c++]);
    if (!m) throw IoError("campaign csv: unknown method name");
    row.method = *m;
    row.g_opt = Vector::Zero(num_gains);
    for (Eigen::Index i = 0; i < num_gains; ++i) {
      const std::string& v = cells[c++];
      row.g_opt[i] = v.empty() ? 0.0 : std::stod(v);
    }
    row.J_opt = std::stod(cells[c++]);
    if (!cells[c].empty()) row.rel_gain_err = std::stod(cells[c]);
    ++c;
    row.wall_time_s = std::stod(cells[c++]);
    row.basis_r = cells[c].empty() ? -1 : std::stoi(cells[c]);
    ++c;
    row.basis_re = cells[c].empty() ? -1 : std::stoi(cells[c]);
    ++c;
    row.restarts = std::stoi(cells[c++]);
    row.status = cells[c++];
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace dampopt
