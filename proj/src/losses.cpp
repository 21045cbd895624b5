#include "mvt/losses.hpp"

#include <cmath>

namespace mvt {

namespace {

void check_logistic_target(double b) {
  if (b != 1.0 && b != -1.0) {
    throw InvalidInput("logistic loss requires target in {-1, +1}, got " +
                       std::to_string(b));
  }
}

// log(1 + exp(t)) without overflow for large positive t.
double log1p_exp(double t) {
  if (t > 30.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// 1 / (1 + exp(t)) evaluated without overflow.
double inv_one_plus_exp(double t) {
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

LossSpec LossSpec::squared_error() {
  LossSpec spec;
  spec.kind = LossKind::SquaredError;
  spec.beta = 1.0;
  spec.sigma = 1.0;
  return spec;
}

LossSpec LossSpec::logistic(std::optional<double> decision_bound) {
  LossSpec spec;
  spec.kind = LossKind::Logistic;
  spec.beta = 0.25;
  spec.decision_bound = decision_bound;
  if (decision_bound && std::isfinite(*decision_bound)) {
    // Smallest second derivative on |a| <= bound sits at the endpoints.
    const double e = std::exp(-*decision_bound);
    spec.sigma = e / ((1.0 + e) * (1.0 + e));
  } else {
    spec.sigma = 0.0;
  }
  return spec;
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "squared") return LossKind::SquaredError;
  if (name == "logistic") return LossKind::Logistic;
  throw ConfigError("unknown loss kind: " + name);
}

const char* loss_name(LossKind kind) {
  return kind == LossKind::SquaredError ? "squared" : "logistic";
}

double loss_value(const LossSpec& spec, double a, double b) {
  switch (spec.kind) {
    case LossKind::SquaredError:
      return 0.5 * (a - b) * (a - b);
    case LossKind::Logistic:
      check_logistic_target(b);
      return log1p_exp(-b * a);
  }
  throw InvalidInput("unknown loss kind");
}

double loss_derivative(const LossSpec& spec, double a, double b) {
  switch (spec.kind) {
    case LossKind::SquaredError:
      return a - b;
    case LossKind::Logistic:
      check_logistic_target(b);
      return -b * inv_one_plus_exp(b * a);
  }
  throw InvalidInput("unknown loss kind");
}

double self_boundedness_gap(const LossSpec& spec, double a, double b) {
  const double value = loss_value(spec, a, b);
  const double deriv = loss_derivative(spec, a, b);
  return 2.0 * spec.beta * value - deriv * deriv;
}

}  // namespace mvt
