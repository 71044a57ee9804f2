// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_BENCH_HPP
#define DAMPOPT_BENCH_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/optimize.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

enum class Family { example1, example2 };

struct BenchmarkOverrides {
  std::optional<double> alpha;
  std::optional<double> stiffness;             // example 1 uniform spring constant
  std::optional<double> k1, k2, k3;            // example 2 spring constants
  std::optional<GainBounds> gain_bounds;       // applied to every gain
  std::optional<std::pair<int, int>> damper_positions;  // (j, k); default first config
};

// Consecutive-mass chain with next-neighbor springs; four grounded dampers
// at j, j+1, k, k+1 driven by two shared gains.
SecondOrderSystem example1_system(int n, const BenchmarkOverrides& overrides = {});
std::vector<std::pair<int, int>> example1_configs(int n);

// Two coupled mass lines joined through a tail mass; four relative dampers
// with independent gains.
SecondOrderSystem example2_system(int d, const BenchmarkOverrides& overrides = {});
std::vector<std::pair<int, int>> example2_configs(int d);

// Deterministic quasi-uniform test grid in the gain box: a full lattice
// when count is a perfect power of the dimension, a Halton sequence
// otherwise.
std::vector<DampingParameter> uniform_test_grid(const BoundsBox& box, int count);

enum class Method { exact, rbm, adaptive };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct CampaignSpec {
  Family family = Family::example1;
  int scale = 190;  // n for example 1, d for example 2
  BenchmarkOverrides overrides;
  int grid_size = 0;       // 0: family default (36 and 21)
  double tol_f = 0.0;      // 0: family default (1e-3 and 1e-2)
  double opt_tol = 0.0;    // 0: family default (1e-4 and 5e-4)
  SignSolveOptions basis_sign;                         // protocol solves
  SignSolveOptions exact_sign = oracle_sign_options(); // full-order objective solves
  std::vector<int> config_filter;  // 1-based config ids; empty = all
  int max_evals = 0;
  int dense_cap = 600;
};

struct ConfigResult {
  int config_id = 0;
  int j = 0;
  int k = 0;
  Method method = Method::exact;
  Vector g_opt;
  double J_opt = 0.0;
  std::optional<double> rel_gain_err;
  double wall_time_s = 0.0;
  int basis_r = -1;
  int basis_re = -1;
  int restarts = 0;
  std::string status = "ok";
};

struct CampaignResult {
  std::vector<ConfigResult> rows;
  Eigen::Index num_gains = 0;
};

CampaignResult run_campaign(const CampaignSpec& spec, const std::vector<Method>& methods,
                            int threads = 1);

void write_campaign_csv(std::ostream& os, const CampaignResult& result);
CampaignResult parse_campaign_csv(std::istream& is);

// Family defaults from the experimental protocol.
double default_tol_f(Family f);
double default_opt_tol(Family f);
int default_grid_size(Family f);
DampingParameter default_start(Family f);
DampingParameter default_residual_start(Family f);

}  // namespace dampopt

#endif  // DAMPOPT_BENCH_HPP
