#pragma once

#include "mvt/cca.hpp"
#include "mvt/common.hpp"
#include "mvt/erm.hpp"
#include "mvt/losses.hpp"
#include "mvt/synth.hpp"

#include <optional>
#include <vector>

namespace mvt {

struct PlantedTruth {
  CanonicalPairModel model;
  LabelModel labels;
};

// Unconstrained risk minimizer of one view and its risk, in closed form
// (squared loss, regression labels).
struct ViewOptimum {
  Vec opt;
  double min_risk = 0.0;
};

struct TransferResult {
  Predictor student;
  Predictor teacher;
  // For the co-regularized pipeline this is the joint excess
  // L(w) + L(v) - L*; elsewhere the student's own excess.
  double student_excess_risk = 0.0;
  double teacher_excess_risk = 0.0;
  // Measured E||student prediction - teacher prediction||^2.
  double agreement_s_squared = 0.0;
  double regularization_weight_used = 0.0;
};

ViewOptimum view_optimum(const PlantedTruth& truth, View view);

// Risk of a linear predictor under the planted model, closed form.
double closed_form_risk(const Predictor& p, const PlantedTruth& truth);

// L(w) minus the optimum over the ball (predictor's own bound when `ball`
// is not given; unconstrained optimum if neither is set).
double excess_risk(const Predictor& p, const PlantedTruth& truth,
                   std::optional<double> ball = std::nullopt);

// Monte-Carlo excess on a labeled pool against a supplied optimal loss.
double excess_risk_monte_carlo(const Predictor& p,
                               const std::vector<PairedSample>& pool,
                               const LossSpec& spec, double l_star);

// E||w'x - v'z||^2 under the model's population covariance.
double population_agreement(const PlantedTruth& truth, const Vec& w,
                            const Vec& v);

// Risk of the CCA-transformed view-z predictor on view x.
double l_cca_risk(const Predictor& teacher, const CcaBasis& basis,
                  const PlantedTruth& truth);

Predictor train_teacher(const Mat& data, const Vec& ys, const LossSpec& spec,
                        double b_v, View view, const SolverConfig& cfg);

// Student pulled toward the teacher's weights (same view).
TransferResult single_view_distill(const Mat& xs, const Vec& ys,
                                   const Predictor& teacher,
                                   const LossSpec& spec, double b_w, double s,
                                   double l_w_star, double radius,
                                   const PlantedTruth& truth,
                                   const SolverConfig& cfg);

// Student pulled toward T_CCA(teacher).
TransferResult multiview_distill_tcca(const Mat& xs, const Vec& ys,
                                      const Predictor& teacher,
                                      const CcaBasis& basis,
                                      const LossSpec& spec, double b_w,
                                      double s, double l_w_star, double radius,
                                      const PlantedTruth& truth,
                                      const SolverConfig& cfg);

// Student regularized by the empirical agreement quadratic over an
// unlabeled pool.
TransferResult multiview_distill_expectation(
    const Mat& xs, const Vec& ys, const std::vector<PairedSample>& pool,
    const Predictor& teacher, const LossSpec& spec, double b_w, double s,
    double l_w_star, double radius, const PlantedTruth& truth,
    const SolverConfig& cfg);

// Same with the population-exact quadratic encoded by a basis.
TransferResult multiview_distill_expectation(
    const Mat& xs, const Vec& ys, const CcaBasis& population_basis,
    const Predictor& teacher, const LossSpec& spec, double b_w, double s,
    double l_w_star, double radius, const PlantedTruth& truth,
    const SolverConfig& cfg);

// Trains both predictors at once with the co-regularized objective.
TransferResult simultaneous_coregularized(
    const std::vector<PairedSample>& data, const CcaBasis& basis,
    const LossSpec& spec, double b_w, double b_v, double s, double l_star,
    double radius, const PlantedTruth& truth, const SolverConfig& cfg);

}  // namespace mvt
