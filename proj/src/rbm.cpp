// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dampopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// tr(A B) for compatible rectangular A, B.
double trace_prod(const Matrix& A, const Matrix& B) {
  return (A.array() * B.transpose().array()).sum();
}

Vector expand_gains_impl(const std::vector<int>& gain_map, const DampingParameter& g,
                         Eigen::Index dampers) {
  Vector out(dampers);
  for (Eigen::Index i = 0; i < dampers; ++i) out[i] = g[gain_map[static_cast<std::size_t>(i)]];
  return out;
}

bool contains_value(const std::vector<DampingParameter>& set, const DampingParameter& g) {
  return std::any_of(set.begin(), set.end(), [&](const DampingParameter& m) { return m == g; });
}

}  // namespace

Vector ReducedModel::expand_gains(const DampingParameter& g) const {
  if (static_cast<std::size_t>(g.size()) == 0 && gain_map.empty()) return Vector();
  return expand_gains_impl(gain_map, g, Fh.cols());
}

Matrix ReducedModel::assemble_state_matrix(const DampingParameter& g) const {
  const Eigen::Index rr = r();
  Matrix A = Matrix::Zero(2 * rr, 2 * rr);
  A.topRightCorner(rr, rr).setIdentity();
  A.bottomLeftCorner(rr, rr) = -W2;
  A.bottomRightCorner(rr, rr) = -2.0 * alpha * W1;
  if (Fh.cols() > 0) {
    Vector gains = expand_gains(g);
    A.bottomRightCorner(rr, rr).noalias() -= Fh * gains.asDiagonal() * Fh.transpose();
  }
  return A;
}

Matrix ReducedModel::rhs() const {
  const Eigen::Index rr = r();
  Matrix Q = Matrix::Zero(2 * rr, 2 * rr);
  Q.bottomRightCorner(rr, rr).noalias() = Bh * Bh.transpose();
  return Q;
}

ReducedModel project_reduced_model(const ModalRealization& modal, const Matrix& V1) {
  if (V1.rows() != modal.n()) throw DimensionError("project_reduced_model: V1 row count mismatch");
  ReducedModel rm;
  rm.V1 = V1;
  rm.W1 = V1.transpose() * (modal.Omega.asDiagonal() * V1);
  rm.W2 = V1.transpose() * (modal.Omega.array().square().matrix().asDiagonal() * V1);
  rm.Fh = V1.transpose() * modal.Fm;
  rm.Bh = V1.transpose() * modal.Bm;
  rm.Ch = modal.Cm * V1;
  rm.alpha = modal.alpha;
  rm.gain_map = modal.gain_map;
  return rm;
}

Matrix solve_reduced_gramian(const ReducedModel& rm, const DampingParameter& g, int dense_cap) {
  SolveDenseOptions opts;
  opts.size_cap = dense_cap;
  return solve_dense(rm.assemble_state_matrix(g), rm.rhs(), opts);
}

ErrorEstimator::PairCache ErrorEstimator::make_pair_cache(const Vector& omega, const Matrix& Fm,
                                                          const Matrix& Wl, const Matrix& Wr) {
  PairCache c;
  auto omp = [&](int p) { return Vector(omega.array().pow(p)); };
  c.P0 = Wl.transpose() * Wr;
  c.P1 = Wl.transpose() * (omega.asDiagonal() * Wr);
  c.P2 = Wl.transpose() * (omp(2).asDiagonal() * Wr);
  c.P3 = Wl.transpose() * (omp(3).asDiagonal() * Wr);
  c.P4 = Wl.transpose() * (omp(4).asDiagonal() * Wr);
  c.Q0a = Wl.transpose() * Fm;
  c.Q1a = Wl.transpose() * (omega.asDiagonal() * Fm);
  c.Q2a = Wl.transpose() * (omp(2).asDiagonal() * Fm);
  c.Q0b = Wr.transpose() * Fm;
  c.Q1b = Wr.transpose() * (omega.asDiagonal() * Fm);
  c.Q2b = Wr.transpose() * (omp(2).asDiagonal() * Fm);
  return c;
}

Matrix ErrorEstimator::project_state(const PairCache& c, const Vector& gains) const {
  const Eigen::Index rl = c.P0.rows();
  const Eigen::Index rr = c.P0.cols();
  Matrix A = Matrix::Zero(2 * rl, 2 * rr);
  A.topRightCorner(rl, rr) = c.P0;
  A.bottomLeftCorner(rl, rr) = -c.P2;
  A.bottomRightCorner(rl, rr) = -2.0 * alpha_ * c.P1;
  if (gains.size() > 0)
    A.bottomRightCorner(rl, rr).noalias() -= c.Q0a * gains.asDiagonal() * c.Q0b.transpose();
  return A;
}

Matrix ErrorEstimator::project_normal(const PairCache& c, const Vector& gains) const {
  const Eigen::Index rl = c.P0.rows();
  const Eigen::Index rr = c.P0.cols();
  Matrix N = Matrix::Zero(2 * rl, 2 * rr);
  N.topLeftCorner(rl, rr) = c.P4;
  N.topRightCorner(rl, rr) = 2.0 * alpha_ * c.P3;
  N.bottomLeftCorner(rl, rr) = 2.0 * alpha_ * c.P3;
  N.bottomRightCorner(rl, rr) = c.P0 + 4.0 * alpha_ * alpha_ * c.P2;
  if (gains.size() > 0) {
    auto G = gains.asDiagonal();
    N.topRightCorner(rl, rr).noalias() += c.Q2a * G * c.Q0b.transpose();
    N.bottomLeftCorner(rl, rr).noalias() += c.Q0a * G * c.Q2b.transpose();
    N.bottomRightCorner(rl, rr).noalias() += 2.0 * alpha_ * (c.Q1a * G * c.Q0b.transpose());
    N.bottomRightCorner(rl, rr).noalias() += 2.0 * alpha_ * (c.Q0a * G * c.Q1b.transpose());
    N.bottomRightCorner(rl, rr).noalias() += c.Q0a * G * SF_ * G * c.Q0b.transpose();
  }
  return N;
}

ErrorEstimator::ErrorEstimator(const ModalRealization& modal, const ReducedBasis& rb,
                               const ReducedModel& rm, EstimatorKind kind)
    : rm_(rm), kind_(kind), alpha_(modal.alpha), gain_map_(modal.gain_map) {
  if (rb.V1err.cols() == 0) throw Error("error estimator requires a nonempty V1err basis");
  SF_ = modal.Fm.transpose() * modal.Fm;
  ee_ = make_pair_cache(modal.Omega, modal.Fm, rb.V1err, rb.V1err);
  vv_ = make_pair_cache(modal.Omega, modal.Fm, rb.V1, rb.V1);
  ev_ = make_pair_cache(modal.Omega, modal.Fm, rb.V1err, rb.V1);
  Behat_ = rb.V1err.transpose() * modal.Bm;
  Chehat_ = modal.Cm * rb.V1err;
  Kc_ = rb.V1err.transpose() * rb.V1;
  BOm2V_ = modal.Bm.transpose() * (modal.Omega.array().square().matrix().asDiagonal() * rb.V1);
  BOmV_ = modal.Bm.transpose() * (modal.Omega.asDiagonal() * rb.V1);
  BF_ = modal.Bm.transpose() * modal.Fm;
  BOm2Ve_ = modal.Bm.transpose() * (modal.Omega.array().square().matrix().asDiagonal() * rb.V1err);
  BOmVe_ = modal.Bm.transpose() * (modal.Omega.asDiagonal() * rb.V1err);
  BhV_ = rb.V1.transpose() * modal.Bm;
  Matrix BtB = modal.Bm.transpose() * modal.Bm;
  t_const_ = BtB.squaredNorm();
}

ErrorEstimate ErrorEstimator::estimate(const DampingParameter& g) const {
  ErrorEstimate est;
  est.which = kind_;
  const Vector gains = gain_map_.empty() ? Vector() : expand_gains_impl(gain_map_, g, SF_.rows());
  const Eigen::Index r = rm_.r();
  const Eigen::Index re = Kc_.rows();
  SolveDenseOptions sopts;
  sopts.size_cap = dense_cap_;
  try {
    est.Phat = solve_dense(rm_.assemble_state_matrix(g), rm_.rhs(), sopts);
    est.response_trace = (rm_.Ch * est.Phat.topLeftCorner(r, r) * rm_.Ch.transpose()).trace();
    est.gramian_norm = est.Phat.topLeftCorner(r, r).norm();

    Matrix Aerr = project_state(ee_, gains);
    Matrix X2 = project_state(ev_, gains);  // V_err^T A V
    // R_err = V_err^T (B B^T + A Ptilde + Ptilde A^T) V_err
    Matrix J = Matrix::Zero(2 * r, 2 * re);  // V^T V_err
    J.topLeftCorner(r, re) = Kc_.transpose();
    J.bottomRightCorner(r, re) = Kc_.transpose();
    Matrix cross = X2 * est.Phat * J;
    Matrix Rerr = cross + cross.transpose();
    Rerr.bottomRightCorner(re, re).noalias() += Behat_ * Behat_.transpose();
    est.Ehat = solve_dense(Aerr, Rerr, sopts);
    est.delta1 = std::abs((Chehat_ * est.Ehat.topLeftCorner(re, re) * Chehat_.transpose()).trace());
    est.delta2 = est.Ehat.topLeftCorner(re, re).norm();
  } catch (const StabilityError& e) {
    throw EstimatorError(std::string("estimator failed at parameter: ") + e.what(), g);
  }
  return est;
}

double ErrorEstimator::residual_norm(const DampingParameter& g) const {
  return residual_norm(g, estimate(g));
}

double ErrorEstimator::residual_norm(const DampingParameter& g, const ErrorEstimate& est) const {
  const Vector gains = gain_map_.empty() ? Vector() : expand_gains_impl(gain_map_, g, SF_.rows());
  const Eigen::Index r = rm_.r();
  const Eigen::Index re = Kc_.rows();
  const Matrix& Eh = est.Ehat;
  const Matrix& Ph = est.Phat;

  Matrix Ae = project_state(ee_, gains);
  Matrix Ne = project_normal(ee_, gains);
  Matrix Av = rm_.assemble_state_matrix(g);
  Matrix Nv = project_normal(vv_, gains);
  Matrix X2 = project_state(ev_, gains);  // V_err^T A V
  // V^T A V_err assembled from the transposed pair pieces
  Matrix X1 = Matrix::Zero(2 * r, 2 * re);
  X1.topRightCorner(r, re) = ev_.P0.transpose();
  X1.bottomLeftCorner(r, re) = -ev_.P2.transpose();
  X1.bottomRightCorner(r, re) = -2.0 * alpha_ * ev_.P1.transpose();
  if (gains.size() > 0)
    X1.bottomRightCorner(r, re).noalias() -= ev_.Q0b * gains.asDiagonal() * ev_.Q0a.transpose();
  Matrix Y = project_normal(ev_, gains);  // V_err^T A^T A V
  Matrix J12 = Matrix::Zero(2 * r, 2 * re);
  J12.topLeftCorner(r, re) = Kc_.transpose();
  J12.bottomRightCorner(r, re) = Kc_.transpose();

  // B^T A(g) W for both bases, m x 2r(_e)
  auto bta = [&](const Matrix& BOm2, const Matrix& BOm, const Matrix& Q0) {
    Matrix R(BOm2.rows(), 2 * Q0.rows());
    R.leftCols(Q0.rows()) = -BOm2;
    R.rightCols(Q0.rows()) = -2.0 * alpha_ * BOm;
    if (gains.size() > 0)
      R.rightCols(Q0.rows()).noalias() -= BF_ * gains.asDiagonal() * Q0.transpose();
    return R;
  };
  Matrix RBe = bta(BOm2Ve_, BOmVe_, ee_.Q0a);  // m x 2r_e
  Matrix RBv = bta(BOm2V_, BOmV_, vv_.Q0a);    // m x 2r

  Matrix BeFull = Matrix::Zero(2 * re, Behat_.cols());
  BeFull.bottomRows(re) = Behat_;
  Matrix BvFull = Matrix::Zero(2 * r, BhV_.cols());
  BvFull.bottomRows(r) = BhV_;

  Matrix AeE = Ae * Eh;
  Matrix AvP = Av * Ph;
  double total = 0.0;
  total += 2.0 * trace_prod(AeE, AeE);
  total += 2.0 * trace_prod(Ne * Eh, Eh);
  total += 4.0 * trace_prod(RBe * Eh, BeFull);
  total += 2.0 * trace_prod(AvP, AvP);
  total += 2.0 * trace_prod(Nv * Ph, Ph);
  total += 4.0 * trace_prod(RBv * Ph, BvFull);
  total += 4.0 * trace_prod(X1 * Eh, X2 * Ph);
  total += 4.0 * trace_prod(J12 * Eh, Y * Ph);
  total += t_const_;
  return std::sqrt(std::max(0.0, total));
}

ErrorEstimate estimate_error(const ModalRealization& modal, const ReducedBasis& rb,
                             const ReducedModel& rm, const DampingParameter& g,
                             EstimatorKind kind) {
  return ErrorEstimator(modal, rb, rm, kind).estimate(g);
}

double error_residual_norm(const ModalRealization& modal, const ReducedBasis& rb,
                           const ReducedModel& rm, const DampingParameter& g) {
  return ErrorEstimator(modal, rb, rm).residual_norm(g);
}

Matrix solve_position_factor(const ModalRealization& modal, const DampingParameter& g,
                             const SignSolveOptions& opts) {
  StructuredStateOperator op = assemble_operator(modal, g);
  LowRankFactor Z = sign_solve(op, lift_input(modal.Bm), opts);
  return Z.z1();
}

Matrix solve_undamped_position_factor(const ModalRealization& modal,
                                      const SignSolveOptions& opts) {
  return solve_position_factor(modal, constant_parameter(modal.num_gains(), 0.0), opts);
}

OfflineResult offline_rbm(const ModalRealization& modal,
                          const std::vector<DampingParameter>& test_set,
                          const OfflineOptions& opts) {
  if (test_set.size() < 2) throw Error("offline_rbm: test set needs at least two parameters");
  if (opts.tol_f <= 0.0) throw Error("offline_rbm: tol_f must be positive");

  const DampingParameter g0 = opts.g0 ? *opts.g0 : test_set.front();
  std::optional<DampingParameter> g0rr = opts.g0rr;
  if (!g0rr) {
    for (const auto& g : test_set)
      if (!(g == g0)) {
        g0rr = g;
        break;
      }
  }

  OfflineResult result;
  ReducedBasis& rb = result.basis;

  if (opts.resume && opts.resume->r() > 0) {
    rb = *opts.resume;
    if (rb.re() == 0) rb.V1err = rb.V1;
  } else {
    rb.includes_undamped = true;
    Matrix Z0 = opts.undamped_z1 ? *opts.undamped_z1
                                 : solve_undamped_position_factor(modal, opts.sign);
    rb.V1 = orth(Z0, opts.orth_drop_tol);
    Matrix Zg0 = solve_position_factor(modal, g0, opts.sign);
    {
      Matrix stacked(modal.n(), rb.V1.cols() + Zg0.cols());
      stacked << rb.V1, Zg0;
      rb.V1 = orth(stacked, opts.orth_drop_tol);
    }
    rb.used_params.push_back(g0);
    if (g0rr) {
      Matrix Zrr = solve_position_factor(modal, *g0rr, opts.sign);
      Matrix stacked(modal.n(), rb.V1.cols() + Zrr.cols());
      stacked << rb.V1, Zrr;
      rb.V1err = orth(stacked, opts.orth_drop_tol);
      rb.used_residual_params.push_back(*g0rr);
    } else {
      rb.V1err = rb.V1;
    }
  }
  result.basis_history.emplace_back(rb.r(), rb.re());

  const int max_rounds = static_cast<int>(test_set.size());
  for (int round = 0; round <= max_rounds; ++round) {
    ReducedModel rm = project_reduced_model(modal, rb.V1);
    ErrorEstimator estimator(modal, rb, rm, opts.estimator);

    double delta_max = -kInf;
    double res_max = -kInf;
    int arg_delta = -1;
    int arg_res = -1;
    bool any_candidate = false;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const DampingParameter& g = test_set[i];
      if (contains_value(rb.used_params, g)) continue;
      any_candidate = true;
      double delta, res;
      try {
        ErrorEstimate est = estimator.estimate(g);
        delta = est.active_relative();
        res = estimator.residual_norm(g, est);
      } catch (const EstimatorError&) {
        delta = kInf;  // inadequate basis at g; force enrichment there
        res = kInf;
      }
      if (delta > delta_max) {
        delta_max = delta;
        arg_delta = static_cast<int>(i);
      }
      if (res > res_max && !contains_value(rb.used_residual_params, g)) {
        res_max = res;
        arg_res = static_cast<int>(i);
      }
    }

    if (!any_candidate || delta_max <= opts.tol_f) {
      result.converged = true;
      result.final_delta_max = any_candidate ? delta_max : 0.0;
      break;
    }
    if (rb.r() >= modal.n())
      throw ConvergenceError("offline_rbm: basis reached full dimension without convergence");

    const DampingParameter g_next = test_set[static_cast<std::size_t>(arg_delta)];
    Matrix Zk = solve_position_factor(modal, g_next, opts.sign);
    {
      Matrix stacked(modal.n(), rb.V1.cols() + Zk.cols());
      stacked << rb.V1, Zk;
      rb.V1 = orth(stacked, opts.orth_drop_tol);
    }
    rb.used_params.push_back(g_next);

    DampingParameter g_rr_next;
    Matrix Zrrk(modal.n(), 0);
    if (arg_res >= 0) {
      g_rr_next = test_set[static_cast<std::size_t>(arg_res)];
      Zrrk = solve_position_factor(modal, g_rr_next, opts.sign);
      rb.used_residual_params.push_back(g_rr_next);
    }
    {
      Matrix stacked(modal.n(), rb.V1err.cols() + Zk.cols() + Zrrk.cols());
      stacked << rb.V1err, Zk, Zrrk;
      rb.V1err = orth(stacked, opts.orth_drop_tol);
    }
    ++result.enrichments;
    result.basis_history.emplace_back(rb.r(), rb.re());
    result.final_delta_max = delta_max;
    if (opts.observer)
      opts.observer(OfflineIterate{result.enrichments, rb, g_next, g_rr_next, delta_max});
  }

  return result;
}

}  // namespace dampopt
