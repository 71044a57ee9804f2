// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_RBM_HPP
#define DAMPOPT_RBM_HPP

#include <functional>
#include <optional>
#include <vector>

#include "dampopt/lyap.hpp"
#include "dampopt/model.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Solution-space basis V1 and error-space basis V1err with provenance of
// the parameters whose solutions were folded in.
struct ReducedBasis {
  Matrix V1;     // n x r, column-orthonormal
  Matrix V1err;  // n x r_e, column-orthonormal
  std::vector<DampingParameter> used_params;           // enrichment set M
  std::vector<DampingParameter> used_residual_params;  // g^rr history
  bool includes_undamped = false;

  Eigen::Index r() const { return V1.cols(); }
  Eigen::Index re() const { return V1err.cols(); }
};

// V1-projected model pieces. A_hat(g) is assembled per gain vector from
// cached blocks; no n-dimensional object is touched during assembly.
struct ReducedModel {
  Matrix V1;
  Matrix W1;   // V1^T Omega V1
  Matrix W2;   // V1^T Omega^2 V1
  Matrix Fh;   // V1^T Fm
  Matrix Bh;   // V1^T Bm
  Matrix Ch;   // Cm V1
  double alpha = 0.0;
  std::vector<int> gain_map;

  Eigen::Index r() const { return V1.cols(); }
  Matrix assemble_state_matrix(const DampingParameter& g) const;  // 2r x 2r
  Matrix rhs() const;                                             // B_hat B_hat^T
  Vector expand_gains(const DampingParameter& g) const;
};

ReducedModel project_reduced_model(const ModalRealization& modal, const Matrix& V1);

// Reduced Gramian P_hat from the 2r-dimensional projected Lyapunov
// equation; throws StabilityError when the projected operator is unstable.
Matrix solve_reduced_gramian(const ReducedModel& rm, const DampingParameter& g,
                             int dense_cap = 1 << 14);

enum class EstimatorKind { delta1, delta2 };

struct ErrorEstimate {
  double delta1 = 0.0;          // |trace(C E11 C^T)|
  double delta2 = 0.0;          // |E11|_F
  EstimatorKind which = EstimatorKind::delta1;
  double response_trace = 0.0;  // trace(C P11 C^T) of the reduced solution
  double gramian_norm = 0.0;    // |P11|_F of the reduced solution
  Matrix Phat;                  // 2r x 2r reduced Gramian
  Matrix Ehat;                  // 2r_e x 2r_e reduced error

  double relative1() const { return response_trace > 0.0 ? delta1 / response_trace : delta1; }
  double relative2() const { return gramian_norm > 0.0 ? delta2 / gramian_norm : delta2; }
  double active_relative() const {
    return which == EstimatorKind::delta1 ? relative1() : relative2();
  }
};

// Evaluates the two estimators and the error-equation residual for many
// parameters against one basis pair; all g-independent projections are
// computed once at construction.
class ErrorEstimator {
 public:
  ErrorEstimator(const ModalRealization& modal, const ReducedBasis& rb, const ReducedModel& rm,
                 EstimatorKind kind = EstimatorKind::delta1);

  ErrorEstimate estimate(const DampingParameter& g) const;
  double residual_norm(const DampingParameter& g) const;
  double residual_norm(const DampingParameter& g, const ErrorEstimate& est) const;

  EstimatorKind kind() const { return kind_; }

 private:
  struct PairCache {  // projections W^T f(Omega) W' and W^T f(Omega) Fm
    Matrix P0, P1, P2, P3, P4;
    Matrix Q0a, Q1a, Q2a;  // left basis against Fm
    Matrix Q0b, Q1b, Q2b;  // right basis against Fm
  };

  static PairCache make_pair_cache(const Vector& omega, const Matrix& Fm, const Matrix& Wl,
                                   const Matrix& Wr);
  Matrix project_state(const PairCache& c, const Vector& gains) const;     // W^T A(g) W'
  Matrix project_normal(const PairCache& c, const Vector& gains) const;    // W^T A^T A W'

  const ReducedModel& rm_;
  EstimatorKind kind_;
  double alpha_ = 0.0;
  std::vector<int> gain_map_;
  Matrix SF_;   // Fm^T Fm
  PairCache ee_, vv_, ev_;  // (V1err,V1err), (V1,V1), (V1err,V1)
  Matrix Behat_;  // V1err^T Bm
  Matrix Chehat_; // Cm V1err
  Matrix Kc_;     // V1err^T V1
  Matrix BOm2V_, BOmV_, BF_;     // Bm^T Omega^2 V1, Bm^T Omega V1, Bm^T Fm
  Matrix BOm2Ve_, BOmVe_;        // same against V1err
  Matrix BhV_;    // V1^T Bm
  double t_const_ = 0.0;         // tr((B^T B)^2)
  int dense_cap_ = 1 << 14;
};

ErrorEstimate estimate_error(const ModalRealization& modal, const ReducedBasis& rb,
                             const ReducedModel& rm, const DampingParameter& g,
                             EstimatorKind kind = EstimatorKind::delta1);

double error_residual_norm(const ModalRealization& modal, const ReducedBasis& rb,
                           const ReducedModel& rm, const DampingParameter& g);

struct OfflineIterate {
  int iteration;
  const ReducedBasis& basis;
  DampingParameter enriched;     // parameter folded into V1 this round
  DampingParameter enriched_rr;  // parameter folded into V1err this round
  double delta_max;
};

struct OfflineOptions {
  double tol_f = 1e-3;
  EstimatorKind estimator = EstimatorKind::delta1;
  SignSolveOptions sign;
  std::optional<DampingParameter> g0;
  std::optional<DampingParameter> g0rr;
  const Matrix* undamped_z1 = nullptr;   // precomputed Z1(0) block, optional
  const ReducedBasis* resume = nullptr;  // continue from a checkpoint instead of seeding
  double orth_drop_tol = 1e-10;
  std::function<void(const OfflineIterate&)> observer;
};

struct OfflineResult {
  ReducedBasis basis;
  bool converged = false;
  int enrichments = 0;
  double final_delta_max = 0.0;
  std::vector<std::pair<int, int>> basis_history;  // (r, r_e) after each round
};

// Greedy offline phase: enrich V1 at the worst estimated parameter and
// V1err at the worst error-equation residual until the estimator is below
// tol_f on the whole test set.
OfflineResult offline_rbm(const ModalRealization& modal,
                          const std::vector<DampingParameter>& test_set,
                          const OfflineOptions& opts = {});

// Z1(g) through the structured sign solver, as an n x q block.
Matrix solve_position_factor(const ModalRealization& modal, const DampingParameter& g,
                             const SignSolveOptions& opts);
Matrix solve_undamped_position_factor(const ModalRealization& modal,
                                      const SignSolveOptions& opts);

}  // namespace dampopt

#endif  // DAMPOPT_RBM_HPP
