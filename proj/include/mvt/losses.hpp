#pragma once

#include "mvt/common.hpp"

#include <optional>
#include <string>

namespace mvt {

enum class LossKind { SquaredError, Logistic };

// Instantaneous loss together with its curvature constants in the decision
// argument. beta is the smoothness constant; sigma the strong-convexity
// constant, which for the logistic loss only holds on |a| <= decision_bound.
struct LossSpec {
  LossKind kind = LossKind::SquaredError;
  double beta = 1.0;
  double sigma = 1.0;
  std::optional<double> decision_bound;

  static LossSpec squared_error();
  static LossSpec logistic(std::optional<double> decision_bound = std::nullopt);
};

LossKind loss_kind_from_name(const std::string& name);
const char* loss_name(LossKind kind);

double loss_value(const LossSpec& spec, double a, double b);

// Derivative in the first (decision) argument.
double loss_derivative(const LossSpec& spec, double a, double b);

// 2*beta*loss(a,b) - loss'(a,b)^2. Nonnegative for smooth nonnegative
// convex losses; exactly zero for squared error.
double self_boundedness_gap(const LossSpec& spec, double a, double b);

}  // namespace mvt
