// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_OPTIMIZE_HPP
#define DAMPOPT_OPTIMIZE_HPP

#include <functional>
#include <optional>
#include <vector>

#include "dampopt/response.hpp"
#include "dampopt/rbm.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

struct NelderMeadResult {
  Vector x;
  double f = 0.0;
  bool converged = false;
  int evals = 0;
};

// Box-constrained simplex search with coefficients 1 / 2 / 0.5 / 0.5 for
// reflection, expansion, contraction and shrink. Every candidate is
// clamped componentwise to the box before evaluation; the run stops when
// both the simplex diameter and the function spread fall below tol.
// +infinity objective values take part through the ordinary ordering.
NelderMeadResult nelder_mead_box(const std::function<double(const Vector&)>& f, Vector g0,
                                 const BoundsBox& bounds, double tol, int max_evals);

struct GuardedObjectiveResult {
  double value = 0.0;  // squared response, or +infinity when the guard fires
  bool conv = true;
};

// Algorithm-style guarded evaluation: when the error estimate at g exceeds
// tol_f the reduced value is not trusted and +infinity is returned.
// Reduced-model instability fires the guard as well.
GuardedObjectiveResult guarded_objective(const ReducedModel& rm, const ErrorEstimator& estimator,
                                         const DampingParameter& g, double tol_f);

struct OptimizationOutcome {
  DampingParameter g_opt;
  EnergyResponseValue J_opt;
  bool converged = false;
  int restarts = 0;
  long evals = 0;
  std::vector<std::pair<int, int>> basis_sizes;  // (r, r_e) per restart
  double seconds_offline = 0.0;
  double seconds_optimize = 0.0;
};

struct OptimizeOptions {
  double opt_tol = 1e-4;
  int max_evals = 0;  // 0: 400 * dimension
  double tol_f = 1e-3;
  int max_restarts = 30;
  EstimatorKind estimator = EstimatorKind::delta1;
  SignSolveOptions exact_sign = oracle_sign_options();  // full-order objective solves
  SignSolveOptions basis_sign;                          // enrichment solves (protocol defaults)
  double orth_drop_tol = 1e-10;
  const Matrix* undamped_z1 = nullptr;
  int dense_cap = 600;
  // called for every guarded evaluation (g, value, conv); used for audits
  std::function<void(const DampingParameter&, double, bool)> audit;
};

// Full-order reference optimization of the exact squared energy response.
OptimizationOutcome optimize_exact(const ModalRealization& modal, const DampingParameter& g0,
                                   const OptimizeOptions& opts = {});

// Online phase on a fixed basis: minimizes the reduced squared response
// without the estimator guard.
OptimizationOutcome optimize_reduced(const ModalRealization& modal, const ReducedBasis& basis,
                                     const DampingParameter& g0, const OptimizeOptions& opts = {});

// Interleaves basis enrichment with the minimization: whenever the guard
// fires the bases grow at the blocking parameter (plus the worst
// error-equation residual over the test set) and the search restarts there.
OptimizationOutcome adaptive_rbm_optimize(const ModalRealization& modal,
                                          const DampingParameter& g0,
                                          const DampingParameter& g0rr,
                                          const std::vector<DampingParameter>& test_set,
                                          const OptimizeOptions& opts = {});

}  // namespace dampopt

#endif  // DAMPOPT_OPTIMIZE_HPP
