// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_MODEL_HPP
#define DAMPOPT_MODEL_HPP

#include <vector>

#include "dampopt/types.hpp"

namespace dampopt {

// Second-order vibrational model
//   M x'' + (D_int + F G(g) F^T) x' + K x = B u,   y = C x
// with M, K symmetric positive definite and gains g restricted to a box.
//
// F may carry more damper columns than there are free gains; gain_map
// assigns each column its gain index (Example 1 drives two damper pairs
// with two shared gains).
class SecondOrderSystem {
 public:
  SecondOrderSystem(Matrix M, Matrix K, double alpha, Matrix B, Matrix C, Matrix F,
                    BoundsBox bounds, std::vector<int> gain_map = {},
                    int spd_check_cap = kDefaultSpdCheckCap);

  Eigen::Index n() const { return M_.rows(); }
  Eigen::Index num_inputs() const { return B_.cols(); }
  Eigen::Index num_outputs() const { return C_.rows(); }
  Eigen::Index num_dampers() const { return F_.cols(); }
  Eigen::Index num_gains() const { return static_cast<Eigen::Index>(bounds_.size()); }

  const Matrix& M() const { return M_; }
  const Matrix& K() const { return K_; }
  double alpha() const { return alpha_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& F() const { return F_; }
  const BoundsBox& bounds() const { return bounds_; }
  const std::vector<int>& gain_map() const { return gain_map_; }
  bool mass_is_diagonal() const { return mass_is_diagonal_; }

  static constexpr int kDefaultSpdCheckCap = 600;

 private:
  Matrix M_, K_, B_, C_, F_;
  double alpha_;
  BoundsBox bounds_;
  std::vector<int> gain_map_;
  bool mass_is_diagonal_ = false;
};

// Modal form of a second-order system: Phi^T M Phi = I, Phi^T K Phi = Omega^2,
// Phi^T D_int Phi = 2 alpha Omega.
struct ModalRealization {
  Matrix Phi;    // n x n modal matrix
  Vector Omega;  // ascending eigenfrequencies
  Matrix Bm;     // Phi^T B
  Matrix Cm;     // C Phi
  Matrix Fm;     // Phi^T F
  double alpha = 0.0;
  std::vector<int> gain_map;
  BoundsBox bounds;

  Eigen::Index n() const { return Omega.size(); }
  Eigen::Index num_inputs() const { return Bm.cols(); }
  Eigen::Index num_outputs() const { return Cm.rows(); }
  Eigen::Index num_dampers() const { return Fm.cols(); }
  Eigen::Index num_gains() const { return static_cast<Eigen::Index>(bounds.size()); }

  // Per-damper diagonal of G(g), expanded through gain_map.
  Vector expand_gains(const DampingParameter& g) const;
};

// n independent 2x2 mode blocks, block i = [a11_i a12_i; a21_i a22_i].
// Under the interleaving permutation this is the dense 2n x 2n matrix
// [diag(a11) diag(a12); diag(a21) diag(a22)].
struct ModeBlocks {
  Vector a11, a12, a21, a22;

  static ModeBlocks state_blocks(const Vector& omega, double alpha);
  static ModeBlocks identity(Eigen::Index n);

  Eigen::Index half_dim() const { return a11.size(); }

  Matrix apply(const Matrix& X) const;
  Matrix apply_transpose(const Matrix& X) const;
  ModeBlocks inverse() const;
  // this + c * other
  ModeBlocks axpy(double c, const ModeBlocks& other) const;
  ModeBlocks scaled(double c) const;
  double frobenius_sq() const;
  Matrix dense() const;
};

// First-order state operator A(g) = Atilde - U G(g) U^T with
// Atilde = [0 I; -Omega^2 -2 alpha Omega] and U = [0; Fm]. Atilde is held
// as two length-n vectors and applied per mode; the dense 2n x 2n form is
// only materialized on demand below a size cap.
class StructuredStateOperator {
 public:
  StructuredStateOperator(Vector omega, double alpha, Matrix Fm, Vector damper_gains);

  Eigen::Index half_dim() const { return omega_.size(); }
  Eigen::Index dim() const { return 2 * omega_.size(); }
  const Vector& omega() const { return omega_; }
  double alpha() const { return alpha_; }
  const Matrix& Fm() const { return Fm_; }
  const Vector& damper_gains() const { return damper_gains_; }

  Matrix apply(const Matrix& X) const;
  Matrix apply_transpose(const Matrix& X) const;
  Matrix dense(int size_cap = 600) const;

  ModeBlocks state_blocks() const { return ModeBlocks::state_blocks(omega_, alpha_); }

 private:
  Vector omega_;
  double alpha_;
  Matrix Fm_;
  Vector damper_gains_;
};

// D_int = 2 alpha M^(1/2) (M^(-1/2) K M^(-1/2))^(1/2) M^(1/2), square roots
// taken through symmetric eigendecompositions.
Matrix build_internal_damping(const Matrix& M, const Matrix& K, double alpha);

// Eigenvector signs are fixed so the largest-magnitude entry of each
// column of Phi is positive; Omega is sorted ascending.
ModalRealization modal_transform(const SecondOrderSystem& sys);

StructuredStateOperator assemble_operator(const ModalRealization& modal,
                                          const DampingParameter& g);

// [0; Bm] lifted to the first-order state dimension.
Matrix lift_input(const Matrix& Bm);

}  // namespace dampopt

#endif  // DAMPOPT_MODEL_HPP
