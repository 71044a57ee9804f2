// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/response.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <complex>

namespace dampopt {
namespace {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// |G(iw)|_F^2 for G(s) = Cm (s^2 I + s (2 alpha Omega + Fm G Fm^T) + Omega^2)^-1 Bm,
// the diagonal-plus-low-rank resolvent inverted through SMW.
struct TransferEvaluator {
  const ModalRealization& modal;
  Vector gains;  // per damper column

  double operator()(double w) const {
    const std::complex<double> s(0.0, w);
    ComplexVector diag = (s * s + 2.0 * modal.alpha * s * modal.Omega.array() +
                          modal.Omega.array().square())
                             .matrix();
    ComplexMatrix X = diag.cwiseInverse().asDiagonal() * modal.Bm.cast<std::complex<double>>();
    if (gains.size() > 0) {
      ComplexMatrix Fd = diag.cwiseInverse().asDiagonal() * modal.Fm.cast<std::complex<double>>();
      ComplexMatrix M = modal.Fm.transpose().cast<std::complex<double>>() * Fd;  // l x l
      ComplexMatrix cap = ComplexMatrix::Identity(M.rows(), M.rows()) +
                          s * (M * gains.asDiagonal().toDenseMatrix().cast<std::complex<double>>());
      ComplexMatrix rhs = modal.Fm.transpose().cast<std::complex<double>>() * X;
      X.noalias() -= Fd * (s * (gains.cast<std::complex<double>>().asDiagonal() *
                                cap.lu().solve(rhs)));
    }
    return (modal.Cm.cast<std::complex<double>>() * X).squaredNorm();
  }
};

struct AdaptiveSimpson {
  const std::function<double(double)>& f;
  double abs_tol;
  int max_depth;
  long max_evals;
  long evals = 0;

  double eval(double x) {
    if (++evals > max_evals)
      throw AccuracyError("quadrature: evaluation budget exhausted before reaching the target");
    return f(x);
  }

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                 int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    if (depth >= max_depth)
      throw AccuracyError("quadrature: grid too coarse, error estimate above target");
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  double integrate(double a, double b, double tol) {
    const double m = 0.5 * (a + b);
    const double fa = eval(a);
    const double fm = eval(m);
    const double fb = eval(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return recurse(a, b, fa, fm, fb, whole, tol, 0);
  }
};

}  // namespace

EnergyResponseValue make_response(double squared, ResponseSource source) {
  EnergyResponseValue v;
  // tiny negative traces are rounding noise
  if (squared < 0.0 && squared > -1e-12 * std::abs(squared + 1.0)) squared = 0.0;
  v.squared = std::max(squared, 0.0);
  v.value = std::sqrt(v.squared);
  v.source = source;
  return v;
}

EnergyResponseValue exact_energy_response(const ModalRealization& modal,
                                          const DampingParameter& g,
                                          const ExactResponseOptions& opts) {
  if (g.size() > 0 && g.values.minCoeff() < 0.0)
    throw Error("exact_energy_response: gains must be nonnegative");
  const Eigen::Index n = modal.n();
  double squared = 0.0;
  if (!opts.force_sign && 2 * n <= opts.dense_cap) {
    StructuredStateOperator op = assemble_operator(modal, g);
    SolveDenseOptions dopts;
    dopts.size_cap = opts.dense_cap;
    Matrix B = lift_input(modal.Bm);
    Matrix P = solve_dense(op.dense(opts.dense_cap), B * B.transpose(), dopts);
    squared = (modal.Cm * P.topLeftCorner(n, n) * modal.Cm.transpose()).trace();
  } else {
    StructuredStateOperator op = assemble_operator(modal, g);
    LowRankFactor Z = sign_solve(op, lift_input(modal.Bm), opts.sign);
    squared = (modal.Cm * Z.z1()).squaredNorm();
  }
  return make_response(squared, ResponseSource::exact);
}

EnergyResponseValue quadrature_energy_response(const ModalRealization& modal,
                                               const DampingParameter& g,
                                               const QuadratureOptions& opts) {
  TransferEvaluator transfer{modal, modal.expand_gains(g)};
  if (modal.Cm.cwiseAbs().maxCoeff() == 0.0 || modal.Bm.cwiseAbs().maxCoeff() == 0.0)
    return make_response(0.0, ResponseSource::quadrature);

  const double wmax = opts.wmax_factor * modal.Omega.maxCoeff();
  std::function<double(double)> f = [&](double w) { return transfer(w); };

  // crude scale estimate from the resonance peaks to set the absolute tolerance
  double scale = 0.0;
  for (Eigen::Index i = 0; i < modal.Omega.size(); ++i)
    scale = std::max(scale, transfer(modal.Omega[i]));
  scale = std::max(scale * modal.Omega.maxCoeff() * 1e-3, 1e-300);

  AdaptiveSimpson quad{f, 0.0, opts.max_depth, opts.max_evals};
  std::vector<double> breaks;
  breaks.push_back(0.0);
  for (Eigen::Index i = 0; i < modal.Omega.size(); ++i)
    if (modal.Omega[i] < wmax) breaks.push_back(modal.Omega[i]);
  breaks.push_back(wmax);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  const double tol_per = opts.rel_tol * scale / static_cast<double>(breaks.size());
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    integral += quad.integrate(breaks[i], breaks[i + 1], tol_per);

  // tail via u = 1/w
  std::function<double(double)> tail = [&](double u) {
    return u == 0.0 ? 0.0 : transfer(1.0 / u) / (u * u);
  };
  AdaptiveSimpson tail_quad{tail, 0.0, opts.max_depth, opts.max_evals};
  integral += tail_quad.integrate(0.0, 1.0 / wmax, tol_per);

  return make_response(integral / M_PI, ResponseSource::quadrature);
}

EnergyResponseValue reduced_energy_response(const ReducedModel& rm, const DampingParameter& g) {
  if (rm.r() == 0) throw Error("reduced_energy_response: empty basis");
  Matrix Phat = solve_reduced_gramian(rm, g);
  const Eigen::Index r = rm.r();
  double squared = (rm.Ch * Phat.topLeftCorner(r, r) * rm.Ch.transpose()).trace();
  return make_response(squared, ResponseSource::reduced);
}

}  // namespace dampopt
