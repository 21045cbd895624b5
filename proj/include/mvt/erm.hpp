#pragma once

#include "mvt/cca.hpp"
#include "mvt/common.hpp"
#include "mvt/losses.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace mvt {

struct Predictor {
  Vec weights;
  View view = View::X;
  std::optional<double> norm_bound;
};

// Penalty (1/2)(w - c)' Q (w - c), with Q either nu * I (scalar form) or an
// explicit symmetric PSD matrix. An empty center means zero.
struct QuadraticRegularizer {
  Vec center;
  std::optional<double> scalar;
  std::optional<Mat> matrix;

  static QuadraticRegularizer ridge(double nu, Vec center = Vec());
  static QuadraticRegularizer quadratic_form(Mat q, Vec center = Vec());

  double value(const Vec& w) const;
  Vec gradient(const Vec& w) const;
  double lipschitz() const;         // nu, or lambda_max(Q)
  double strong_convexity() const;  // nu, or lambda_min(Q)
};

enum class StepRule { FixedInverseSmoothness, Backtracking };

struct SolverConfig {
  long max_iterations = 2000000;
  double gradient_tolerance = 1e-10;
  StepRule step_rule = StepRule::FixedInverseSmoothness;
  // Test hook: records the objective after every accepted step when set.
  std::vector<double>* objective_trace = nullptr;
};

// Closed-form weights for the joint co-regularized objective and the
// constants behind them.
struct MultitaskParams {
  double gamma = 0.0;
  double nu = 0.0;
  double d_squared = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double beta_prime = 0.0;
};

Vec project_to_ball(const Vec& w, double B);

Predictor constrained_erm(const Mat& xs, const Vec& ys, const LossSpec& spec,
                          double B, const SolverConfig& cfg);

Predictor regularized_erm(const Mat& xs, const Vec& ys, const LossSpec& spec,
                          const QuadraticRegularizer& reg,
                          std::optional<double> B, const SolverConfig& cfg);

// gamma = 8 beta R^2 / n + sqrt(64 beta^2 R^4 / n^2 + 16 beta R^2 L* / (n B^2))
double gamma_lemma1(double beta, double radius, double l_star, double B,
                    long n);

// Same closed form with the class radius replaced by the agreement radius.
double nu_theorem1(double beta, double radius, double l_w_star, double S,
                   long n);

MultitaskParams multitask_params(double beta, double radius, double b_w,
                                 double b_v, double s_agreement, double lambda1,
                                 double l_star, long n);

// Minimizes the two empirical view losses plus gamma/2 (||w||^2 + ||v||^2)
// plus nu/2 times the agreement quadratic encoded by the basis.
std::pair<Predictor, Predictor> joint_coregularized_erm(
    const std::vector<PairedSample>& data, const LossSpec& spec,
    const MultitaskParams& params, const CcaBasis& basis,
    const SolverConfig& cfg);

inline Vec to_cca_coords(const CcaBasis& basis, const Predictor& p) {
  return to_cca_coords(basis, p.weights, p.view);
}

}  // namespace mvt
