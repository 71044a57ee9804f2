// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dampopt/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace dampopt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vector clamp_vec(Vector x, const BoundsBox& bounds) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto& b = bounds[static_cast<std::size_t>(i)];
    x[i] = std::min(std::max(x[i], b.lower), b.upper);
  }
  return x;
}

}  // namespace

NelderMeadResult nelder_mead_box(const std::function<double(const Vector&)>& f, Vector g0,
                                 const BoundsBox& bounds, double tol, int max_evals) {
  const Eigen::Index dim = g0.size();
  if (dim == 0 || static_cast<std::size_t>(dim) != bounds.size())
    throw DimensionError("nelder_mead_box: dimension mismatch between start point and bounds");
  if (tol <= 0.0) throw Error("nelder_mead_box: tol must be positive");
  if (max_evals <= 0) max_evals = 400 * static_cast<int>(dim);

  NelderMeadResult result;
  std::vector<Vector> vx;
  std::vector<double> fx;
  vx.reserve(static_cast<std::size_t>(dim) + 1);

  auto evaluate = [&](const Vector& x) {
    ++result.evals;
    return f(x);
  };

  Vector base = clamp_vec(std::move(g0), bounds);
  vx.push_back(base);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto& b = bounds[static_cast<std::size_t>(i)];
    const double step = std::max(0.05 * (b.upper - b.lower), 1.0);
    Vector v = base;
    v[i] = (base[i] + step <= b.upper) ? base[i] + step : base[i] - step;
    vx.push_back(clamp_vec(std::move(v), bounds));
  }
  fx.resize(vx.size());
  for (std::size_t i = 0; i < vx.size(); ++i) fx[i] = evaluate(vx[i]);
  if (std::all_of(fx.begin(), fx.end(), [](double v) { return std::isinf(v); }))
    throw StartFailureError("nelder_mead_box: objective is +inf at every initial simplex vertex");

  std::vector<std::size_t> order(vx.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
  };

  while (true) {
    sort_simplex();
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double diameter = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i)
      diameter = std::max(diameter, (vx[i] - vx[best]).cwiseAbs().maxCoeff());
    const double spread = fx[worst] - fx[best];
    if (diameter <= tol && spread <= tol) {
      result.converged = true;
      break;
    }
    if (result.evals >= max_evals) break;

    Vector centroid = Vector::Zero(dim);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += vx[order[i]];
    centroid /= static_cast<double>(order.size() - 1);

    Vector xr = clamp_vec(centroid + (centroid - vx[worst]), bounds);
    const double fr = evaluate(xr);
    if (fr < fx[best]) {
      Vector xe = clamp_vec(centroid + 2.0 * (centroid - vx[worst]), bounds);
      const double fe = evaluate(xe);
      if (fe < fr) {
        vx[worst] = std::move(xe);
        fx[worst] = fe;
      } else {
        vx[worst] = std::move(xr);
        fx[worst] = fr;
      }
    } else if (fr < fx[second_worst]) {
      vx[worst] = std::move(xr);
      fx[worst] = fr;
    } else {
      const bool outside = fr < fx[worst];
      Vector xc = outside ? clamp_vec(centroid + 0.5 * (xr - centroid), bounds)
                          : clamp_vec(centroid + 0.5 * (vx[worst] - centroid), bounds);
      const double fc = evaluate(xc);
      if (fc < std::min(fr, fx[worst])) {
        vx[worst] = std::move(xc);
        fx[worst] = fc;
      } else {
        for (std::size_t i = 1; i < order.size(); ++i) {
          const std::size_t idx = order[i];
          vx[idx] = vx[best] + 0.5 * (vx[idx] - vx[best]);
          fx[idx] = evaluate(vx[idx]);
        }
      }
    }
  }

  sort_simplex();
  result.x = vx[order.front()];
  result.f = fx[order.front()];
  return result;
}

GuardedObjectiveResult guarded_objective(const ReducedModel& rm, const ErrorEstimator& estimator,
                                         const DampingParameter& g, double tol_f) {
  if (rm.r() == 0) throw Error("guarded_objective: empty basis");
  GuardedObjectiveResult out;
  try {
    ErrorEstimate est = estimator.estimate(g);
    if (est.active_relative() > tol_f) {
      out.value = kInf;
      out.conv = false;
      return out;
    }
    const Eigen::Index r = rm.r();
    out.value = (rm.Ch * est.Phat.topLeftCorner(r, r) * rm.Ch.transpose()).trace();
    out.conv = true;
  } catch (const EstimatorError&) {
    out.value = kInf;  // instability counts as an estimate above tolerance
    out.conv = false;
  }
  return out;
}

OptimizationOutcome optimize_exact(const ModalRealization& modal, const DampingParameter& g0,
                                   const OptimizeOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  ExactResponseOptions ropts;
  ropts.sign = opts.exact_sign;
  ropts.dense_cap = opts.dense_cap;
  auto objective = [&](const Vector& x) {
    return exact_energy_response(modal, DampingParameter(x), ropts).squared;
  };
  NelderMeadResult nm =
      nelder_mead_box(objective, g0.values, modal.bounds, opts.opt_tol, opts.max_evals);
  OptimizationOutcome out;
  out.g_opt = DampingParameter(nm.x);
  out.J_opt = make_response(nm.f, ResponseSource::exact);
  out.converged = nm.converged;
  out.evals = nm.evals;
  out.seconds_optimize = seconds_since(t0);
  return out;
}

OptimizationOutcome optimize_reduced(const ModalRealization& modal, const ReducedBasis& basis,
                                     const DampingParameter& g0, const OptimizeOptions& opts) {
  if (basis.r() == 0) throw Error("optimize_reduced: empty basis");
  const auto t0 = std::chrono::steady_clock::now();
  ReducedModel rm = project_reduced_model(modal, basis.V1);
  auto objective = [&](const Vector& x) {
    return reduced_energy_response(rm, DampingParameter(x)).squared;
  };
  NelderMeadResult nm =
      nelder_mead_box(objective, g0.values, modal.bounds, opts.opt_tol, opts.max_evals);
  OptimizationOutcome out;
  out.g_opt = DampingParameter(nm.x);
  out.J_opt = make_response(nm.f, ResponseSource::reduced);
  out.converged = nm.converged;
  out.evals = nm.evals;
  out.basis_sizes.emplace_back(static_cast<int>(basis.r()), static_cast<int>(basis.re()));
  out.seconds_optimize = seconds_since(t0);
  return out;
}

OptimizationOutcome adaptive_rbm_optimize(const ModalRealization& modal,
                                          const DampingParameter& g0,
                                          const DampingParameter& g0rr,
                                          const std::vector<DampingParameter>& test_set,
                                          const OptimizeOptions& opts) {
  if (g0 == g0rr) throw Error("adaptive_rbm_optimize: g0 and g0rr must differ");
  const auto t0 = std::chrono::steady_clock::now();

  OptimizationOutcome out;
  ReducedBasis rb;
  rb.includes_undamped = true;

  Matrix Z0 = opts.undamped_z1 ? *opts.undamped_z1
                               : solve_undamped_position_factor(modal, opts.basis_sign);
  Matrix Zg0 = solve_position_factor(modal, g0, opts.basis_sign);
  {
    Matrix stacked(modal.n(), Z0.cols() + Zg0.cols());
    stacked << Z0, Zg0;
    rb.V1 = orth(stacked, opts.orth_drop_tol);
  }
  rb.used_params.push_back(g0);
  {
    Matrix Zrr = solve_position_factor(modal, g0rr, opts.basis_sign);
    Matrix stacked(modal.n(), rb.V1.cols() + Zrr.cols());
    stacked << rb.V1, Zrr;
    rb.V1err = orth(stacked, opts.orth_drop_tol);
    rb.used_residual_params.push_back(g0rr);
  }
  out.seconds_offline = seconds_since(t0);

  DampingParameter start = clamp_to_box(g0, modal.bounds);
  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    ReducedModel rm = project_reduced_model(modal, rb.V1);
    ErrorEstimator estimator(modal, rb, rm, opts.estimator);
    out.basis_sizes.emplace_back(static_cast<int>(rb.r()), static_cast<int>(rb.re()));

    bool guard_fired = false;
    DampingParameter blocking;
    auto objective = [&](const Vector& x) {
      DampingParameter g(x);
      GuardedObjectiveResult res = guarded_objective(rm, estimator, g, opts.tol_f);
      if (!res.conv && !guard_fired) {
        guard_fired = true;
        blocking = g;
      }
      if (opts.audit) opts.audit(g, res.value, res.conv);
      return res.value;
    };

    NelderMeadResult nm;
    try {
      nm = nelder_mead_box(objective, start.values, modal.bounds, opts.opt_tol, opts.max_evals);
    } catch (const StartFailureError&) {
      // every initial vertex was blocked; enrich at the first of them
      nm.converged = false;
      nm.x = start.values;
      nm.f = kInf;
    }
    out.evals += nm.evals;

    if (!guard_fired) {
      out.g_opt = DampingParameter(nm.x);
      out.J_opt = make_response(nm.f, ResponseSource::reduced);
      out.converged = nm.converged;
      out.restarts = restart;
      out.seconds_optimize = seconds_since(t0) - out.seconds_offline;
      return out;
    }

    // enrich V1 at the blocking parameter and V1err at the worst
    // error-equation residual, then restart from the blocking parameter
    Matrix Zblk = solve_position_factor(modal, blocking, opts.basis_sign);
    {
      Matrix stacked(modal.n(), rb.V1.cols() + Zblk.cols());
      stacked << rb.V1, Zblk;
      rb.V1 = orth(stacked, opts.orth_drop_tol);
    }
    rb.used_params.push_back(blocking);

    // the residual argmax sees the already-enlarged solution basis
    ReducedModel rm_next = project_reduced_model(modal, rb.V1);
    ErrorEstimator estimator_next(modal, rb, rm_next, opts.estimator);
    double res_max = -kInf;
    int arg_res = -1;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      if (std::any_of(rb.used_residual_params.begin(), rb.used_residual_params.end(),
                      [&](const DampingParameter& m) { return m == test_set[i]; }))
        continue;
      double res;
      try {
        res = estimator_next.residual_norm(test_set[i]);
      } catch (const EstimatorError&) {
        res = kInf;
      }
      if (res > res_max) {
        res_max = res;
        arg_res = static_cast<int>(i);
      }
    }
    Matrix Zrr(modal.n(), 0);
    if (arg_res >= 0) {
      const DampingParameter& grr = test_set[static_cast<std::size_t>(arg_res)];
      Zrr = solve_position_factor(modal, grr, opts.basis_sign);
      rb.used_residual_params.push_back(grr);
    }
    {
      Matrix stacked(modal.n(), rb.V1err.cols() + Zblk.cols() + Zrr.cols());
      stacked << rb.V1err, Zblk, Zrr;
      rb.V1err = orth(stacked, opts.orth_drop_tol);
    }
    start = clamp_to_box(blocking, modal.bounds);
    out.restarts = restart + 1;
  }

  out.converged = false;
  out.seconds_optimize = seconds_since(t0) - out.seconds_offline;
  return out;
}

}  // namespace dampopt
