// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_RESPONSE_HPP
#define DAMPOPT_RESPONSE_HPP

#include "dampopt/lyap.hpp"
#include "dampopt/model.hpp"
#include "dampopt/rbm.hpp"
#include "dampopt/types.hpp"

namespace dampopt {

enum class ResponseSource { exact, reduced, quadrature };

// Energy response J(g) (H2 norm of the transfer function) together with
// the squared value, which is the trace optimized downstream.
struct EnergyResponseValue {
  double value = 0.0;
  double squared = 0.0;
  ResponseSource source = ResponseSource::exact;
};

EnergyResponseValue make_response(double squared, ResponseSource source);

struct ExactResponseOptions {
  int dense_cap = 600;          // below this first-order dimension use the dense solver
  SignSolveOptions sign = oracle_sign_options();
  bool force_sign = false;
};

// J(g)^2 = trace(C P11 C^T); the Gramian comes from the dense solver below
// the cap and from the structured sign solver above it.
EnergyResponseValue exact_energy_response(const ModalRealization& modal,
                                          const DampingParameter& g,
                                          const ExactResponseOptions& opts = {});

struct QuadratureOptions {
  double wmax_factor = 10.0;  // integrate up to wmax_factor * max omega, tail by substitution
  double rel_tol = 1e-5;
  int max_depth = 48;
  long max_evals = 4000000;
};

// Frequency-domain oracle: adaptive Simpson quadrature of the H2 integrand
// with breakpoints at the resonances and an inverted-variable tail.
EnergyResponseValue quadrature_energy_response(const ModalRealization& modal,
                                               const DampingParameter& g,
                                               const QuadratureOptions& opts = {});

// Reduced response from the 2r-dimensional projected Lyapunov equation.
EnergyResponseValue reduced_energy_response(const ReducedModel& rm, const DampingParameter& g);

}  // namespace dampopt

#endif  // DAMPOPT_RESPONSE_HPP
