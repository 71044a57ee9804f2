// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace dampopt {
namespace {

bool is_symmetric(const Matrix& A, double tol) {
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + A.cwiseAbs().maxCoeff());
}

bool is_diagonal(const Matrix& A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (i != j && A(i, j) != 0.0) return false;
  return true;
}

void check_spd(const Matrix& A, const char* name, int cap) {
  if (A.rows() != A.cols()) throw DimensionError(std::string(name) + " is not square");
  if (!is_symmetric(A, 1e-12)) throw NotSpdError(std::string(name) + " is not symmetric");
  if (A.rows() <= cap) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw NotSpdError(std::string("eigenvalue check failed for ") + name);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw NotSpdError(std::string(name) + " is not positive definite");
  } else {
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success)
      throw NotSpdError(std::string(name) + " is not positive definite (Cholesky failed)");
  }
}

// Symmetric eigendecomposition helper: returns (eigvecs, eigvals ascending).
std::pair<Matrix, Vector> sym_eig(const Matrix& A, const char* name) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success)
    throw Error(std::string("symmetric eigendecomposition failed for ") + name);
  return {es.eigenvectors(), es.eigenvalues()};
}

// M^(+-1/2) for SPD M; fast path for diagonal mass matrices.
std::pair<Matrix, Matrix> mass_square_roots(const Matrix& M) {
  const Eigen::Index n = M.rows();
  if (is_diagonal(M)) {
    Vector d = M.diagonal();
    if (d.minCoeff() <= 0.0) throw NotSpdError("mass matrix has a nonpositive diagonal entry");
    Matrix half = Vector(d.array().sqrt()).asDiagonal();
    Matrix invhalf = Vector(d.array().rsqrt()).asDiagonal();
    return {half, invhalf};
  }
  auto [E, lam] = sym_eig(M, "M");
  if (lam.minCoeff() <= 0.0) throw NotSpdError("mass matrix is not positive definite");
  Matrix half = E * lam.array().sqrt().matrix().asDiagonal() * E.transpose();
  Matrix invhalf = E * lam.array().rsqrt().matrix().asDiagonal() * E.transpose();
  (void)n;
  return {half, invhalf};
}

}  // namespace

SecondOrderSystem::SecondOrderSystem(Matrix M, Matrix K, double alpha, Matrix B, Matrix C,
                                     Matrix F, BoundsBox bounds, std::vector<int> gain_map,
                                     int spd_check_cap)
    : M_(std::move(M)),
      K_(std::move(K)),
      B_(std::move(B)),
      C_(std::move(C)),
      F_(std::move(F)),
      alpha_(alpha),
      bounds_(std::move(bounds)),
      gain_map_(std::move(gain_map)) {
  const Eigen::Index nn = M_.rows();
  check_spd(M_, "M", spd_check_cap);
  check_spd(K_, "K", spd_check_cap);
  if (K_.rows() != nn) throw DimensionError("K dimension does not match M");
  if (B_.rows() != nn) throw DimensionError("B row count does not match n");
  if (C_.cols() != nn) throw DimensionError("C column count does not match n");
  if (F_.rows() != nn) throw DimensionError("F row count does not match n");
  if (F_.cols() > nn) throw DimensionError("more dampers than states");
  if (alpha_ < 0.0) throw Error("alpha must be nonnegative");
  if (gain_map_.empty()) {
    gain_map_.resize(static_cast<std::size_t>(F_.cols()));
    for (std::size_t i = 0; i < gain_map_.size(); ++i) gain_map_[i] = static_cast<int>(i);
  }
  if (static_cast<Eigen::Index>(gain_map_.size()) != F_.cols())
    throw DimensionError("gain_map size does not match damper count");
  for (int idx : gain_map_)
    if (idx < 0 || idx >= static_cast<int>(bounds_.size()))
      throw DimensionError("gain_map index outside bounds list");
  for (const auto& b : bounds_)
    if (!(b.lower > 0.0) || b.lower > b.upper)
      throw Error("gain bounds must satisfy 0 < lower <= upper");
  mass_is_diagonal_ = is_diagonal(M_);
}

Vector ModalRealization::expand_gains(const DampingParameter& g) const {
  if (g.size() != num_gains()) throw DimensionError("gain vector size does not match bounds");
  Vector out(Fm.cols());
  for (Eigen::Index i = 0; i < Fm.cols(); ++i)
    out[i] = g[gain_map[static_cast<std::size_t>(i)]];
  return out;
}

Matrix build_internal_damping(const Matrix& M, const Matrix& K, double alpha) {
  check_spd(M, "M", SecondOrderSystem::kDefaultSpdCheckCap);
  check_spd(K, "K", SecondOrderSystem::kDefaultSpdCheckCap);
  auto [half, invhalf] = mass_square_roots(M);
  Matrix S = invhalf * K * invhalf;
  S = 0.5 * (S + S.transpose());
  auto [U, lam] = sym_eig(S, "M^(-1/2) K M^(-1/2)");
  if (lam.minCoeff() <= 0.0) throw NotSpdError("K is not positive definite in mass inner product");
  Matrix sqrtS = U * lam.array().sqrt().matrix().asDiagonal() * U.transpose();
  Matrix D = 2.0 * alpha * half * sqrtS * half;
  return 0.5 * (D + D.transpose());
}

ModalRealization modal_transform(const SecondOrderSystem& sys) {
  auto [half, invhalf] = mass_square_roots(sys.M());
  (void)half;
  Matrix S = invhalf * sys.K() * invhalf;
  S = 0.5 * (S + S.transpose());
  auto [U, lam] = sym_eig(S, "M^(-1/2) K M^(-1/2)");
  if (lam.minCoeff() <= 0.0) throw NotSpdError("stiffness is not positive definite in mass inner product");

  ModalRealization modal;
  modal.Phi = invhalf * U;
  // deterministic sign convention: largest-magnitude entry of each column positive
  for (Eigen::Index j = 0; j < modal.Phi.cols(); ++j) {
    Eigen::Index imax;
    modal.Phi.col(j).cwiseAbs().maxCoeff(&imax);
    if (modal.Phi(imax, j) < 0.0) modal.Phi.col(j) *= -1.0;
  }
  modal.Omega = lam.array().sqrt();
  modal.Bm = modal.Phi.transpose() * sys.B();
  modal.Cm = sys.C() * modal.Phi;
  modal.Fm = modal.Phi.transpose() * sys.F();
  modal.alpha = sys.alpha();
  modal.gain_map = sys.gain_map();
  modal.bounds = sys.bounds();
  return modal;
}

ModeBlocks ModeBlocks::state_blocks(const Vector& omega, double alpha) {
  ModeBlocks b;
  const Eigen::Index n = omega.size();
  b.a11 = Vector::Zero(n);
  b.a12 = Vector::Ones(n);
  b.a21 = -omega.array().square();
  b.a22 = -2.0 * alpha * omega.array();
  return b;
}

ModeBlocks ModeBlocks::identity(Eigen::Index n) {
  ModeBlocks b;
  b.a11 = Vector::Ones(n);
  b.a12 = Vector::Zero(n);
  b.a21 = Vector::Zero(n);
  b.a22 = Vector::Ones(n);
  return b;
}

Matrix ModeBlocks::apply(const Matrix& X) const {
  const Eigen::Index n = half_dim();
  if (X.rows() != 2 * n) throw DimensionError("mode-block apply: row count mismatch");
  Matrix Y(X.rows(), X.cols());
  Y.topRows(n) = a11.asDiagonal() * X.topRows(n) + a12.asDiagonal() * X.bottomRows(n);
  Y.bottomRows(n) = a21.asDiagonal() * X.topRows(n) + a22.asDiagonal() * X.bottomRows(n);
  return Y;
}

Matrix ModeBlocks::apply_transpose(const Matrix& X) const {
  const Eigen::Index n = half_dim();
  if (X.rows() != 2 * n) throw DimensionError("mode-block apply: row count mismatch");
  Matrix Y(X.rows(), X.cols());
  Y.topRows(n) = a11.asDiagonal() * X.topRows(n) + a21.asDiagonal() * X.bottomRows(n);
  Y.bottomRows(n) = a12.asDiagonal() * X.topRows(n) + a22.asDiagonal() * X.bottomRows(n);
  return Y;
}

ModeBlocks ModeBlocks::inverse() const {
  Vector det = a11.array() * a22.array() - a12.array() * a21.array();
  if ((det.array().abs() < 1e-300).any())
    throw NumericalBreakdownError("singular 2x2 mode block", -1);
  ModeBlocks inv;
  inv.a11 = a22.array() / det.array();
  inv.a12 = -a12.array() / det.array();
  inv.a21 = -a21.array() / det.array();
  inv.a22 = a11.array() / det.array();
  return inv;
}

ModeBlocks ModeBlocks::axpy(double c, const ModeBlocks& other) const {
  ModeBlocks out;
  out.a11 = a11 + c * other.a11;
  out.a12 = a12 + c * other.a12;
  out.a21 = a21 + c * other.a21;
  out.a22 = a22 + c * other.a22;
  return out;
}

ModeBlocks ModeBlocks::scaled(double c) const {
  ModeBlocks out;
  out.a11 = c * a11;
  out.a12 = c * a12;
  out.a21 = c * a21;
  out.a22 = c * a22;
  return out;
}

double ModeBlocks::frobenius_sq() const {
  return a11.squaredNorm() + a12.squaredNorm() + a21.squaredNorm() + a22.squaredNorm();
}

Matrix ModeBlocks::dense() const {
  const Eigen::Index n = half_dim();
  Matrix A = Matrix::Zero(2 * n, 2 * n);
  A.topLeftCorner(n, n).diagonal() = a11;
  A.topRightCorner(n, n).diagonal() = a12;
  A.bottomLeftCorner(n, n).diagonal() = a21;
  A.bottomRightCorner(n, n).diagonal() = a22;
  return A;
}

StructuredStateOperator::StructuredStateOperator(Vector omega, double alpha, Matrix Fm,
                                                 Vector damper_gains)
    : omega_(std::move(omega)), alpha_(alpha), Fm_(std::move(Fm)),
      damper_gains_(std::move(damper_gains)) {
  if (Fm_.rows() != omega_.size()) throw DimensionError("Fm row count does not match n");
  if (damper_gains_.size() != Fm_.cols())
    throw DimensionError("damper gain count does not match F columns");
  if (damper_gains_.size() > 0 && damper_gains_.minCoeff() < 0.0)
    throw Error("damping gains must be nonnegative");
}

Matrix StructuredStateOperator::apply(const Matrix& X) const {
  const Eigen::Index n = half_dim();
  if (X.rows() != 2 * n) throw DimensionError("operator apply: row count mismatch");
  Matrix Y(X.rows(), X.cols());
  Y.topRows(n) = X.bottomRows(n);
  Y.bottomRows(n) = -(omega_.array().square().matrix().asDiagonal() * X.topRows(n)) -
                    2.0 * alpha_ * (omega_.asDiagonal() * X.bottomRows(n));
  if (Fm_.cols() > 0)
    Y.bottomRows(n).noalias() -=
        Fm_ * (damper_gains_.asDiagonal() * (Fm_.transpose() * X.bottomRows(n)));
  return Y;
}

Matrix StructuredStateOperator::apply_transpose(const Matrix& X) const {
  const Eigen::Index n = half_dim();
  if (X.rows() != 2 * n) throw DimensionError("operator apply: row count mismatch");
  Matrix Y(X.rows(), X.cols());
  Y.topRows(n) = -(omega_.array().square().matrix().asDiagonal() * X.bottomRows(n));
  Y.bottomRows(n) = X.topRows(n) - 2.0 * alpha_ * (omega_.asDiagonal() * X.bottomRows(n));
  if (Fm_.cols() > 0)
    Y.bottomRows(n).noalias() -=
        Fm_ * (damper_gains_.asDiagonal() * (Fm_.transpose() * X.bottomRows(n)));
  return Y;
}

Matrix StructuredStateOperator::dense(int size_cap) const {
  const Eigen::Index n = half_dim();
  if (2 * n > size_cap) throw CapacityError("dense materialization exceeds size cap");
  Matrix A = Matrix::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n).setIdentity();
  A.bottomLeftCorner(n, n).diagonal() = -omega_.array().square();
  A.bottomRightCorner(n, n).diagonal() = -2.0 * alpha_ * omega_.array();
  if (Fm_.cols() > 0)
    A.bottomRightCorner(n, n).noalias() -= Fm_ * damper_gains_.asDiagonal() * Fm_.transpose();
  return A;
}

StructuredStateOperator assemble_operator(const ModalRealization& modal,
                                          const DampingParameter& g) {
  return StructuredStateOperator(modal.Omega, modal.alpha, modal.Fm, modal.expand_gains(g));
}

Matrix lift_input(const Matrix& Bm) {
  Matrix B = Matrix::Zero(2 * Bm.rows(), Bm.cols());
  B.bottomRows(Bm.rows()) = Bm;
  return B;
}

}  // namespace dampopt
