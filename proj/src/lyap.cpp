// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/lyap.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

namespace dampopt {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// |T + sign * U G V^T|_F^2 without forming any 2n x 2n matrix.
double structured_norm_sq(const ModeBlocks& T, const Matrix& U, const Matrix& G,
                          const Matrix& V, double sign) {
  double total = T.frobenius_sq();
  if (U.cols() == 0 || V.cols() == 0) return total;
  Matrix TtU = T.apply_transpose(U);
  Matrix X = V.transpose() * TtU;  // qv x qu
  total += 2.0 * sign * (X.array() * G.transpose().array()).sum();
  Matrix Su = U.transpose() * U;
  Matrix Sv = V.transpose() * V;
  Matrix tmp = G.transpose() * Su * G;  // qv x qv
  total += (tmp.array() * Sv.array()).sum();
  return total;
}

// Rank-revealing pieces of a column-pivoted QR: orthonormal Q1 (leading
// rank columns) and the multiplier W = R1 P^T with X ~ Q1 W.
struct RankRevealed {
  Matrix Q1;
  Matrix W;
};

RankRevealed rank_revealed_qr(const Matrix& X, double tol, Eigen::Index q_max, bool* hit_cap) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  const Matrix& R = qr.matrixR();
  const Eigen::Index kmax = std::min(X.rows(), X.cols());
  const double r00 = kmax > 0 ? std::abs(R(0, 0)) : 0.0;
  Eigen::Index rank = 0;
  if (r00 > 0.0)
    while (rank < kmax && std::abs(R(rank, rank)) >= tol * r00) ++rank;
  if (rank > q_max) {
    rank = q_max;
    if (hit_cap) *hit_cap = true;
  }
  RankRevealed out;
  out.Q1 = qr.householderQ() * Matrix::Identity(X.rows(), rank);
  out.W = R.topRows(rank).template triangularView<Eigen::Upper>().toDenseMatrix() *
          qr.colsPermutation().transpose();
  return out;
}

// B' with B' B'^T ~ B B^T, dropping trailing columns below tol relative to
// the leading one and enforcing the hard column cap.
Matrix compress_factor(const Matrix& B, double tol, Eigen::Index q_max, bool* hit_cap) {
  if (B.cols() <= 1) return B;
  RankRevealed rr = rank_revealed_qr(B, tol, q_max, hit_cap);
  if (rr.Q1.cols() == 0) return Matrix(B.rows(), 0);
  // fold W into a square factor: B B^T ~ Q1 (W W^T) Q1^T = (Q1 L)(Q1 L)^T
  Eigen::HouseholderQR<Matrix> lq(rr.W.transpose());
  Matrix L = lq.matrixQR()
                 .topRows(rr.W.rows())
                 .template triangularView<Eigen::Upper>()
                 .toDenseMatrix()
                 .transpose();
  return rr.Q1 * L;
}

// Compresses U, V while preserving the product U G V^T: the dropped
// directions are folded into the middle factor.
void compress_pair(Matrix& U, Matrix& G, Matrix& V, double tol, Eigen::Index q_max,
                   bool* hit_cap) {
  if (U.cols() == 0 || V.cols() == 0) return;
  RankRevealed ru = rank_revealed_qr(U, tol, q_max, hit_cap);
  RankRevealed rv = rank_revealed_qr(V, tol, q_max, hit_cap);
  G = ru.W * G * rv.W.transpose();
  U = ru.Q1;
  V = rv.Q1;
}

struct SchurBlocks {
  std::vector<Eigen::Index> start;
  std::vector<Eigen::Index> size;
};

SchurBlocks partition_quasi_triangular(const Matrix& T) {
  SchurBlocks b;
  const Eigen::Index N = T.rows();
  Eigen::Index i = 0;
  while (i < N) {
    Eigen::Index sz = (i + 1 < N && T(i + 1, i) != 0.0) ? 2 : 1;
    b.start.push_back(i);
    b.size.push_back(sz);
    i += sz;
  }
  return b;
}

void check_schur_stable(const Matrix& T, const SchurBlocks& blocks) {
  for (std::size_t b = 0; b < blocks.start.size(); ++b) {
    const Eigen::Index i = blocks.start[b];
    double re = (blocks.size[b] == 2) ? 0.5 * (T(i, i) + T(i + 1, i + 1)) : T(i, i);
    if (re >= 0.0) throw StabilityError("operator has an eigenvalue with nonnegative real part");
  }
}

}  // namespace

Matrix solve_dense(const Matrix& A, const Matrix& Q, const SolveDenseOptions& opts) {
  const Eigen::Index N = A.rows();
  if (A.cols() != N || Q.rows() != N || Q.cols() != N)
    throw DimensionError("solve_dense: dimension mismatch");
  if (N > opts.size_cap) throw CapacityError("solve_dense: dimension exceeds dense cap");

  Eigen::RealSchur<Matrix> schur(A);
  if (schur.info() != Eigen::Success) throw Error("solve_dense: Schur reduction failed");
  const Matrix& T = schur.matrixT();
  const Matrix& Uo = schur.matrixU();
  const SchurBlocks blocks = partition_quasi_triangular(T);
  check_schur_stable(T, blocks);

  Matrix C = -(Uo.transpose() * Q * Uo);
  Matrix Y = Matrix::Zero(N, N);
  const Eigen::Index nb = static_cast<Eigen::Index>(blocks.start.size());

  for (Eigen::Index jb = nb - 1; jb >= 0; --jb) {
    const Eigen::Index cj = blocks.start[static_cast<std::size_t>(jb)];
    const Eigen::Index qj = blocks.size[static_cast<std::size_t>(jb)];
    for (Eigen::Index ib = nb - 1; ib >= jb; --ib) {
      const Eigen::Index ri = blocks.start[static_cast<std::size_t>(ib)];
      const Eigen::Index pi = blocks.size[static_cast<std::size_t>(ib)];
      Matrix rhs = C.block(ri, cj, pi, qj);
      if (ri + pi < N)
        rhs.noalias() -= T.block(ri, ri + pi, pi, N - ri - pi) * Y.block(ri + pi, cj, N - ri - pi, qj);
      if (cj + qj < N)
        rhs.noalias() -= Y.block(ri, cj + qj, pi, N - cj - qj) * T.block(cj, cj + qj, qj, N - cj - qj).transpose();
      // (I ⊗ T_ii + T_jj ⊗ I) vec(Y_ij) = vec(rhs), system size <= 4
      const Eigen::Index k = pi * qj;
      Matrix Kr = Matrix::Zero(k, k);
      for (Eigen::Index j = 0; j < qj; ++j)
        for (Eigen::Index i = 0; i < pi; ++i) {
          for (Eigen::Index i2 = 0; i2 < pi; ++i2) Kr(i + j * pi, i2 + j * pi) += T(ri + i, ri + i2);
          for (Eigen::Index j2 = 0; j2 < qj; ++j2) Kr(i + j * pi, i + j2 * pi) += T(cj + j, cj + j2);
        }
      Eigen::Matrix<double, Eigen::Dynamic, 1> rhs_vec(k);
      for (Eigen::Index j = 0; j < qj; ++j)
        for (Eigen::Index i = 0; i < pi; ++i) rhs_vec[i + j * pi] = rhs(i, j);
      Eigen::PartialPivLU<Matrix> lu(Kr);
      Eigen::Matrix<double, Eigen::Dynamic, 1> sol = lu.solve(rhs_vec);
      for (Eigen::Index j = 0; j < qj; ++j)
        for (Eigen::Index i = 0; i < pi; ++i) Y(ri + i, cj + j) = sol[i + j * pi];
      if (ib != jb) Y.block(cj, ri, qj, pi) = Y.block(ri, cj, pi, qj).transpose();
    }
  }

  Matrix P = Uo * Y * Uo.transpose();
  return 0.5 * (P + P.transpose());
}

Matrix orth(const Matrix& X, double drop_tol) {
  if (X.cols() == 0) return Matrix(X.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] <= 0.0) return Matrix(X.rows(), 0);
  Eigen::Index r = 0;
  while (r < s.size() && s[r] >= drop_tol * s[0]) ++r;
  return svd.matrixU().leftCols(r);
}

LowRankFactor sign_solve(const StructuredStateOperator& op, const Matrix& rhs,
                         const SignSolveOptions& opts, SignSolveStats* stats) {
  const Eigen::Index n = op.half_dim();
  if (rhs.rows() != 2 * n) throw DimensionError("sign_solve: rhs row count mismatch");
  if (opts.tol <= 0.0) throw Error("sign_solve: tol must be positive");
  if (opts.iter_max < 1) throw Error("sign_solve: iter_max must be at least 1");
  const Eigen::Index q_max = opts.q_max > 0 ? opts.q_max : 40 * std::max<Eigen::Index>(rhs.cols(), 1);

  SignSolveStats local;
  SignSolveStats& st = stats ? *stats : local;
  st = SignSolveStats{};

  // Zero-gain damper columns contribute nothing; drop them so the middle
  // factor stays invertible.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < op.damper_gains().size(); ++i)
    if (op.damper_gains()[i] > 0.0) active.push_back(i);
  const Eigen::Index q0 = static_cast<Eigen::Index>(active.size());
  Matrix U = Matrix::Zero(2 * n, q0);
  Matrix G = Matrix::Zero(q0, q0);
  for (Eigen::Index c = 0; c < q0; ++c) {
    U.col(c).tail(n) = op.Fm().col(active[static_cast<std::size_t>(c)]);
    G(c, c) = op.damper_gains()[active[static_cast<std::size_t>(c)]];
  }
  Matrix V = U;
  Matrix B = rhs;
  ModeBlocks At = op.state_blocks();

  auto check_finite = [&](int k) {
    if (!B.allFinite() || !U.allFinite() || !V.allFinite() || !G.allFinite() ||
        !At.a11.allFinite() || !At.a12.allFinite() || !At.a21.allFinite() || !At.a22.allFinite())
      throw DivergenceError("sign_solve: non-finite entries at iteration " + std::to_string(k));
  };

  for (int k = 0; k < opts.iter_max; ++k) {
    ModeBlocks Tplus = At;
    Tplus.a11.array() += 1.0;
    Tplus.a22.array() += 1.0;
    const double close_sq = structured_norm_sq(Tplus, U, G, V, -1.0);
    st.closeness.push_back(std::sqrt(std::max(0.0, close_sq)));
    if (close_sq <= opts.tol) {
      st.converged = true;
      break;
    }

    ModeBlocks Ainv = At.inverse();
    Matrix Up, Vp, Gp;
    if (U.cols() > 0) {
      Up = Ainv.apply(U);
      Vp = Ainv.apply_transpose(V);
      Matrix M = V.transpose() * Up;  // qv x qu
      Matrix cap = Matrix::Identity(M.rows(), M.rows()) - M * G;
      Eigen::FullPivLU<Matrix> lu(cap);
      if (!lu.isInvertible())
        throw NumericalBreakdownError("sign_solve: singular capacitance matrix", k);
      Gp = G * lu.inverse();
    } else {
      Up = Matrix(2 * n, 0);
      Vp = Matrix(2 * n, 0);
      Gp = Matrix(0, 0);
    }

    const double norm_a_sq = structured_norm_sq(At, U, G, V, -1.0);
    const double norm_ai_sq = structured_norm_sq(Ainv, Up, Gp, Vp, 1.0);
    const double c = std::sqrt(std::sqrt(norm_ai_sq / norm_a_sq));
    if (!std::isfinite(c) || c <= 0.0)
      throw DivergenceError("sign_solve: invalid scaling factor at iteration " + std::to_string(k));

    if (opts.observer)
      opts.observer(SignIterationState{At, U, V, G, B, c, k});

    // A_k^{-1} B through SMW
    Matrix Y = Ainv.apply(B);
    if (U.cols() > 0) Y.noalias() += Up * (Gp * (V.transpose() * Y));
    Matrix Bnew(2 * n, B.cols() + Y.cols());
    Bnew.leftCols(B.cols()) = (std::sqrt(c) / kSqrt2) * B;
    Bnew.rightCols(Y.cols()) = (1.0 / (kSqrt2 * std::sqrt(c))) * Y;

    At = At.scaled(0.5 * c).axpy(0.5 / c, Ainv);

    if (U.cols() > 0) {
      Matrix Unew(2 * n, U.cols() + Up.cols());
      Unew << U, Up;
      Matrix Vnew(2 * n, V.cols() + Vp.cols());
      Vnew << V, Vp;
      Matrix Gnew = Matrix::Zero(G.rows() + Gp.rows(), G.cols() + Gp.cols());
      Gnew.topLeftCorner(G.rows(), G.cols()) = 0.5 * c * G;
      Gnew.bottomRightCorner(Gp.rows(), Gp.cols()) = -(0.5 / c) * Gp;
      U = std::move(Unew);
      V = std::move(Vnew);
      G = std::move(Gnew);
      const double uv_tol =
          opts.uv_trunc_tol > 0.0 ? opts.uv_trunc_tol : std::min(opts.trunc_tol, 1e-8);
      compress_pair(U, G, V, uv_tol, q_max, &st.hit_column_cap);
    }

    B = compress_factor(Bnew, opts.trunc_tol, q_max, &st.hit_column_cap);
    check_finite(k);
    st.iterations = k + 1;
  }

  if (!st.converged) {
    ModeBlocks Tplus = At;
    Tplus.a11.array() += 1.0;
    Tplus.a22.array() += 1.0;
    const double close_sq = structured_norm_sq(Tplus, U, G, V, -1.0);
    st.closeness.push_back(std::sqrt(std::max(0.0, close_sq)));
    st.converged = close_sq <= opts.tol;
  }

  return LowRankFactor(B / kSqrt2, n);
}

double lyapunov_residual(const StructuredStateOperator& op, const LowRankFactor& factor,
                         const Matrix& rhs) {
  const Eigen::Index n = op.half_dim();
  if (factor.half_dim != n && factor.cols() > 0)
    throw DimensionError("lyapunov_residual: factor dimension mismatch");
  if (rhs.rows() != 2 * n) throw DimensionError("lyapunov_residual: rhs row count mismatch");
  const Matrix& Z = factor.Z;
  Matrix W = Z.cols() > 0 ? op.apply(Z) : Matrix(2 * n, 0);

  Matrix N = rhs.transpose() * rhs;          // m x m
  double total = N.squaredNorm();            // tr((B^T B)^2), N symmetric
  if (Z.cols() > 0) {
    Matrix S = Z.transpose() * W;            // q x q
    Matrix T = rhs.transpose() * Z;          // m x q
    Matrix Yb = rhs.transpose() * W;         // m x q
    Matrix M2 = Z.transpose() * Z;
    Matrix W2 = W.transpose() * W;
    total += 2.0 * (S.array() * S.transpose().array()).sum();  // 2 tr(S^2)
    total += 4.0 * (T.array() * Yb.array()).sum();
    total += 2.0 * (W2.array() * M2.array()).sum();
  }
  return std::sqrt(std::max(0.0, total));
}

}  // namespace dampopt
