// Copyright (c) 2026 The dampopt developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAMPOPT_TYPES_HPP
#define DAMPOPT_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dampopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Admissible interval [lower, upper] for one damping gain.
struct GainBounds {
  double lower = 0.0;
  double upper = 0.0;
};

using BoundsBox = std::vector<GainBounds>;

// Vector of free damping gains (friction coefficients), g_i >= 0.
struct DampingParameter {
  Vector values;

  DampingParameter() = default;
  explicit DampingParameter(Vector v) : values(std::move(v)) {}
  DampingParameter(std::initializer_list<double> v)
      : values(Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size()))) {}

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }

  bool operator==(const DampingParameter& other) const {
    return values.size() == other.values.size() && values == other.values;
  }
};

inline DampingParameter constant_parameter(Eigen::Index n, double value) {
  return DampingParameter(Vector::Constant(n, value));
}

inline DampingParameter clamp_to_box(const DampingParameter& g, const BoundsBox& box) {
  DampingParameter out = g;
  for (Eigen::Index i = 0; i < out.size() && i < static_cast<Eigen::Index>(box.size()); ++i) {
    const auto& b = box[static_cast<std::size_t>(i)];
    out.values[i] = std::min(std::max(out.values[i], b.lower), b.upper);
  }
  return out;
}

inline bool inside_box(const DampingParameter& g, const BoundsBox& box) {
  if (g.size() != static_cast<Eigen::Index>(box.size())) return false;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g[i] < box[static_cast<std::size_t>(i)].lower || g[i] > box[static_cast<std::size_t>(i)].upper)
      return false;
  }
  return true;
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Construction received a matrix that is not symmetric positive definite.
struct NotSpdError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Operator has an eigenvalue with nonnegative real part.
struct StabilityError : Error {
  using Error::Error;
};

// Problem size exceeds a configured dense cap.
struct CapacityError : Error {
  using Error::Error;
};

// Singular capacitance matrix inside the low-rank update solve.
struct NumericalBreakdownError : Error {
  explicit NumericalBreakdownError(const std::string& what, int iteration_)
      : Error(what), iteration(iteration_) {}
  int iteration = -1;
};

struct DivergenceError : Error {
  using Error::Error;
};

// Quadrature could not reach the requested accuracy within its budget.
struct AccuracyError : Error {
  using Error::Error;
};

struct ConvergenceError : Error {
  using Error::Error;
};

// Every vertex of the initial simplex evaluated to +infinity.
struct StartFailureError : Error {
  using Error::Error;
};

// Error estimator could not be evaluated at a parameter; callers treat
// this as "estimate above tolerance".
struct EstimatorError : Error {
  explicit EstimatorError(const std::string& what, DampingParameter g)
      : Error(what), parameter(std::move(g)) {}
  DampingParameter parameter;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dampopt

#endif  // DAMPOPT_TYPES_HPP
