// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_LYAP_HPP
#define DAMPOPT_LYAP_HPP

#include <functional>
#include <vector>

#include "dampopt/model.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

// Tall factor Z of a Gramian approximation P ~ Z Z^T in the 2n-dimensional
// first-order state space; Z1 (top n rows) spans the position part.
struct LowRankFactor {
  Matrix Z;
  Eigen::Index half_dim = 0;

  LowRankFactor() = default;
  LowRankFactor(Matrix Z_, Eigen::Index half_dim_) : Z(std::move(Z_)), half_dim(half_dim_) {}

  Eigen::Index cols() const { return Z.cols(); }
  auto z1() const { return Z.topRows(half_dim); }
  auto z2() const { return Z.bottomRows(half_dim); }
};

struct SolveDenseOptions {
  int size_cap = 600;
};

// Solves A P + P A^T + Q = 0 for stable A via real Schur reduction and
// block back-substitution on the quasi-triangular system. Returns the
// symmetrized solution.
Matrix solve_dense(const Matrix& A, const Matrix& Q, const SolveDenseOptions& opts = {});

// Snapshot of the structured sign iteration handed to an observer.
struct SignIterationState {
  const ModeBlocks& state_blocks;  // Atilde_k
  const Matrix& U;
  const Matrix& V;
  const Matrix& G;  // dense middle factor, U G V^T is the low-rank correction
  const Matrix& B;
  double c_k;
  int iteration;
};

struct SignSolveOptions {
  double tol = 1e-6;       // stop when |A_k + I|_F^2 <= tol
  int iter_max = 10;
  double trunc_tol = 1e-8; // relative singular-value drop in column compression
  // drop tolerance for the U_k/V_k operator factors; 0 keeps them at
  // min(trunc_tol, 1e-8) so a coarse factor truncation never degrades the
  // iteration operator itself
  double uv_trunc_tol = 0.0;
  Eigen::Index q_max = 0;  // hard column cap; 0 means 40 * rhs columns
  std::function<void(const SignIterationState&)> observer;
};

inline SignSolveOptions oracle_sign_options() {
  SignSolveOptions o;
  o.tol = 1e-12;
  o.iter_max = 60;
  return o;
}

struct SignSolveStats {
  int iterations = 0;
  bool converged = false;
  bool hit_column_cap = false;
  std::vector<double> closeness;  // |A_k + I|_F per iteration
};

// Structure-exploiting sign-function iteration for
//   A(g) P + P A(g)^T = -rhs rhs^T,  A(g) = Atilde - U G U^T.
// Every inverse is applied through the Sherman-Morrison-Woodbury identity
// with per-mode 2x2 solves; B_k, U_k, V_k are column-compressed after each
// iteration. Returns Z with P ~ Z Z^T.
LowRankFactor sign_solve(const StructuredStateOperator& op, const Matrix& rhs,
                         const SignSolveOptions& opts = {}, SignSolveStats* stats = nullptr);

// |rhs rhs^T + A Z Z^T + Z Z^T A^T|_F evaluated through low-rank trace
// algebra; no 2n x 2n matrix is formed.
double lyapunov_residual(const StructuredStateOperator& op, const LowRankFactor& factor,
                         const Matrix& rhs);

// Rank-revealing orthonormalization: columns of an orthonormal basis for
// range(X), dropping singular values below drop_tol relative to the largest.
Matrix orth(const Matrix& X, double drop_tol = 1e-10);

}  // namespace dampopt

#endif  // DAMPOPT_LYAP_HPP
