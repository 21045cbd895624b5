#include "mvt/transfer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <limits>

namespace mvt {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool closed_form_available(const LossSpec& spec, const PlantedTruth& truth) {
  return spec.kind == LossKind::SquaredError &&
         truth.labels.kind == LabelKind::RegressionGaussianNoise;
}

double safe_excess(const Predictor& p, const PlantedTruth& truth,
                   const LossSpec& spec, std::optional<double> ball) {
  if (!closed_form_available(spec, truth)) return kNan;
  return excess_risk(p, truth, ball);
}

// Center c with A c = b for the quadratic penalty rewrite; b is always in
// the range of A here, so a semidefinite solve suffices.
Vec quadratic_center(const Mat& a, const Vec& b) {
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Vec c = ldlt.solve(b);
    if ((a * c - b).norm() <= 1e-8 * (1.0 + b.norm())) return c;
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

}  // namespace

ViewOptimum view_optimum(const PlantedTruth& truth, View view) {
  if (truth.labels.kind != LabelKind::RegressionGaussianNoise) {
    throw InvalidInput("closed-form optima exist only for regression labels");
  }
  const double noise = truth.labels.noise_std;
  ViewOptimum vo;
  if (view == View::X) {
    vo.opt = truth.labels.w_star;
    vo.min_risk = 0.5 * noise * noise;
    return vo;
  }
  if (view == View::Z) {
    vo.opt = view_z_optimum(truth.model, truth.labels);
    const double w_sq = truth.labels.w_star.squaredNorm();
    vo.min_risk = 0.5 * (w_sq - vo.opt.squaredNorm()) + 0.5 * noise * noise;
    return vo;
  }
  throw InvalidInput("view_optimum takes view X or Z");
}

double closed_form_risk(const Predictor& p, const PlantedTruth& truth) {
  const ViewOptimum vo = view_optimum(truth, p.view);
  return 0.5 * (p.weights - vo.opt).squaredNorm() + vo.min_risk;
}

double excess_risk(const Predictor& p, const PlantedTruth& truth,
                   std::optional<double> ball) {
  const ViewOptimum vo = view_optimum(truth, p.view);
  const std::optional<double> bound = ball ? ball : p.norm_bound;
  double l_star = vo.min_risk;
  if (bound) {
    const double gap = std::max(0.0, vo.opt.norm() - *bound);
    l_star += 0.5 * gap * gap;
  }
  return 0.5 * (p.weights - vo.opt).squaredNorm() + vo.min_risk - l_star;
}

double excess_risk_monte_carlo(const Predictor& p,
                               const std::vector<PairedSample>& pool,
                               const LossSpec& spec, double l_star) {
  if (pool.empty()) throw InvalidInput("empty evaluation pool");
  double acc = 0.0;
  for (const auto& s : pool) {
    const Vec& features = p.view == View::Z ? s.z : s.x;
    if (!s.y) throw InvalidInput("pool sample without label");
    acc += loss_value(spec, p.weights.dot(features), *s.y);
  }
  return acc / static_cast<double>(pool.size()) - l_star;
}

double population_agreement(const PlantedTruth& truth, const Vec& w,
                            const Vec& v) {
  const CanonicalPairModel& m = truth.model;
  if (w.size() != m.d_x || v.size() != m.d_z) {
    throw InvalidInput("population_agreement: dimension mismatch");
  }
  const Vec cross = m.phi * (m.lambdas.asDiagonal() * (m.psi.transpose() * v));
  return w.squaredNorm() - 2.0 * w.dot(cross) + v.squaredNorm();
}

double l_cca_risk(const Predictor& teacher, const CcaBasis& basis,
                  const PlantedTruth& truth) {
  Predictor transformed;
  transformed.weights = t_cca(basis, teacher.weights);
  transformed.view = View::X;
  return closed_form_risk(transformed, truth);
}

Predictor train_teacher(const Mat& data, const Vec& ys, const LossSpec& spec,
                        double b_v, View view, const SolverConfig& cfg) {
  Predictor teacher = constrained_erm(data, ys, spec, b_v, cfg);
  teacher.view = view;
  return teacher;
}

TransferResult single_view_distill(const Mat& xs, const Vec& ys,
                                   const Predictor& teacher,
                                   const LossSpec& spec, double b_w, double s,
                                   double l_w_star, double radius,
                                   const PlantedTruth& truth,
                                   const SolverConfig& cfg) {
  if (teacher.view != View::X || teacher.weights.size() != xs.cols()) {
    throw InvalidInput("single_view_distill: teacher must live in view X "
                       "with matching dimension");
  }
  const double nu = nu_theorem1(spec.beta, radius, l_w_star, s, xs.rows());
  TransferResult result;
  result.student = regularized_erm(
      xs, ys, spec, QuadraticRegularizer::ridge(nu, teacher.weights), b_w, cfg);
  result.teacher = teacher;
  result.regularization_weight_used = nu;
  // E||(w - v)'x||^2 reduces to ||w - v||^2 under identity covariance.
  result.agreement_s_squared =
      (result.student.weights - teacher.weights).squaredNorm();
  result.student_excess_risk = safe_excess(result.student, truth, spec, b_w);
  result.teacher_excess_risk =
      safe_excess(teacher, truth, spec, teacher.norm_bound);
  return result;
}

TransferResult multiview_distill_tcca(const Mat& xs, const Vec& ys,
                                      const Predictor& teacher,
                                      const CcaBasis& basis,
                                      const LossSpec& spec, double b_w,
                                      double s, double l_w_star, double radius,
                                      const PlantedTruth& truth,
                                      const SolverConfig& cfg) {
  if (teacher.view != View::Z || teacher.weights.size() != basis.d_z() ||
      xs.cols() != basis.d_x()) {
    throw InvalidInput("multiview_distill_tcca: teacher/basis/data views do "
                       "not line up");
  }
  const double nu = nu_theorem1(spec.beta, radius, l_w_star, s, xs.rows());
  TransferResult result;
  result.student = regularized_erm(
      xs, ys, spec,
      QuadraticRegularizer::ridge(nu, t_cca(basis, teacher.weights)), b_w, cfg);
  result.teacher = teacher;
  result.regularization_weight_used = nu;
  result.agreement_s_squared =
      agreement_quadratic(basis, result.student.weights, teacher.weights).total;
  result.student_excess_risk = safe_excess(result.student, truth, spec, b_w);
  result.teacher_excess_risk =
      safe_excess(teacher, truth, spec, teacher.norm_bound);
  return result;
}

namespace {

TransferResult expectation_distill_impl(const Mat& xs, const Vec& ys,
                                        const Mat& a_hat, const Vec& b_hat,
                                        const Predictor& teacher,
                                        const CcaBasis* basis,
                                        const LossSpec& spec, double b_w,
                                        double s, double l_w_star,
                                        double radius,
                                        const PlantedTruth& truth,
                                        const SolverConfig& cfg) {
  const double nu = nu_theorem1(spec.beta, radius, l_w_star, s, xs.rows());
  // (nu/2) E||w'x - v'z||^2 = (1/2)(w - c)' (nu A)(w - c) + const,
  // with A c = b.
  TransferResult result;
  result.student = regularized_erm(
      xs, ys, spec,
      QuadraticRegularizer::quadratic_form(nu * a_hat,
                                           quadratic_center(a_hat, b_hat)),
      b_w, cfg);
  result.teacher = teacher;
  result.regularization_weight_used = nu;
  if (basis) {
    result.agreement_s_squared =
        agreement_quadratic(*basis, result.student.weights, teacher.weights)
            .total;
  } else {
    result.agreement_s_squared = kNan;  // pool overload fills this in
  }
  result.student_excess_risk = safe_excess(result.student, truth, spec, b_w);
  result.teacher_excess_risk =
      safe_excess(teacher, truth, spec, teacher.norm_bound);
  return result;
}

}  // namespace

TransferResult multiview_distill_expectation(
    const Mat& xs, const Vec& ys, const std::vector<PairedSample>& pool,
    const Predictor& teacher, const LossSpec& spec, double b_w, double s,
    double l_w_star, double radius, const PlantedTruth& truth,
    const SolverConfig& cfg) {
  if (pool.empty()) throw InvalidInput("multiview_distill_expectation: empty "
                                       "unlabeled pool");
  if (teacher.view != View::Z) {
    throw InvalidInput("multiview_distill_expectation: teacher must live in "
                       "view Z");
  }
  const Mat pool_x = view_matrix(pool, View::X);
  const Mat pool_z = view_matrix(pool, View::Z);
  if (pool_x.cols() != xs.cols() || pool_z.cols() != teacher.weights.size()) {
    throw InvalidInput("multiview_distill_expectation: pool dimensions do "
                       "not match");
  }
  const double m = static_cast<double>(pool.size());
  const Mat a_hat = pool_x.transpose() * pool_x / m;
  const Vec teacher_preds = pool_z * teacher.weights;
  const Vec b_hat = pool_x.transpose() * teacher_preds / m;
  const double teacher_sq = teacher_preds.squaredNorm() / m;

  TransferResult result =
      expectation_distill_impl(xs, ys, a_hat, b_hat, teacher, nullptr, spec,
                               b_w, s, l_w_star, radius, truth, cfg);
  // Pool-empirical agreement of student vs teacher.
  const Vec& w = result.student.weights;
  result.agreement_s_squared =
      w.dot(a_hat * w) - 2.0 * b_hat.dot(w) + teacher_sq;
  return result;
}

TransferResult multiview_distill_expectation(
    const Mat& xs, const Vec& ys, const CcaBasis& population_basis,
    const Predictor& teacher, const LossSpec& spec, double b_w, double s,
    double l_w_star, double radius, const PlantedTruth& truth,
    const SolverConfig& cfg) {
  if (teacher.view != View::Z ||
      teacher.weights.size() != population_basis.d_z()) {
    throw InvalidInput("multiview_distill_expectation: teacher must live in "
                       "view Z with matching dimension");
  }
  const Mat a_hat = encoded_sigma_xx(population_basis);
  const Vec b_hat = encoded_sigma_xz(population_basis) * teacher.weights;
  return expectation_distill_impl(xs, ys, a_hat, b_hat, teacher,
                                  &population_basis, spec, b_w, s, l_w_star,
                                  radius, truth, cfg);
}

TransferResult simultaneous_coregularized(
    const std::vector<PairedSample>& data, const CcaBasis& basis,
    const LossSpec& spec, double b_w, double b_v, double s, double l_star,
    double radius, const PlantedTruth& truth, const SolverConfig& cfg) {
  const MultitaskParams params =
      multitask_params(spec.beta, radius, b_w, b_v, s, basis.lambda(0), l_star,
                       static_cast<long>(data.size()));
  auto [w, v] = joint_coregularized_erm(data, spec, params, basis, cfg);

  TransferResult result;
  result.student = std::move(w);
  result.teacher = std::move(v);
  result.regularization_weight_used = params.nu;
  result.agreement_s_squared =
      agreement_quadratic(basis, result.student.weights,
                          result.teacher.weights)
          .total;
  if (closed_form_available(spec, truth)) {
    result.student_excess_risk = closed_form_risk(result.student, truth) +
                                 closed_form_risk(result.teacher, truth) -
                                 l_star;
    result.teacher_excess_risk = excess_risk(result.teacher, truth, b_v);
  } else {
    result.student_excess_risk = kNan;
    result.teacher_excess_risk = kNan;
  }
  return result;
}

}  // namespace mvt
