#include "mvt/erm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mvt {

namespace {

constexpr double kTinyLipschitz = 1e-12;

// Empirical loss over one view with a fast quadratic path for squared error
// (gradient in O(d^2) via precomputed Gram quantities instead of O(n d)).
struct ViewLoss {
  LossSpec spec;
  bool quadratic = false;
  Mat xs;   // kept only for the logistic path
  Vec ys;
  Mat gram;       // X'X / n
  Vec xty;        // X'y / n
  double y_sq_mean = 0.0;
  double max_row_sq = 0.0;
  Eigen::Index dim = 0;

  void init(const Mat& x, const Vec& y, const LossSpec& loss_spec) {
    if (x.rows() == 0) throw InvalidInput("empty training data");
    if (x.rows() != y.size()) {
      throw InvalidInput("data and label counts differ");
    }
    spec = loss_spec;
    dim = x.cols();
    max_row_sq = x.rowwise().squaredNorm().maxCoeff();
    quadratic = spec.kind == LossKind::SquaredError;
    const double n = static_cast<double>(x.rows());
    if (quadratic) {
      gram = x.transpose() * x / n;
      xty = x.transpose() * y / n;
      y_sq_mean = y.squaredNorm() / n;
    } else {
      xs = x;
      ys = y;
    }
  }

  double smoothness() const { return spec.beta * max_row_sq; }

  double value(const Vec& w) const {
    if (quadratic) {
      return 0.5 * (w.dot(gram * w) - 2.0 * xty.dot(w) + y_sq_mean);
    }
    double acc = 0.0;
    const Vec a = xs * w;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      acc += loss_value(spec, a(i), ys(i));
    }
    return acc / static_cast<double>(a.size());
  }

  void add_gradient(const Vec& w, Vec& g) const {
    if (quadratic) {
      g.noalias() += gram * w;
      g.noalias() -= xty;
      return;
    }
    const Vec a = xs * w;
    Vec slope(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      slope(i) = loss_derivative(spec, a(i), ys(i));
    }
    g.noalias() += xs.transpose() * slope / static_cast<double>(a.size());
  }
};

// Projected gradient descent; Problem supplies value(w) and gradient(w, out).
template <typename Problem>
Vec solve_projected_gradient(const Problem& problem, Eigen::Index dim,
                             double lipschitz, std::optional<double> ball,
                             const SolverConfig& cfg, const char* what) {
  if (ball && *ball <= 0.0) throw InvalidInput("ball radius must be positive");
  lipschitz = std::max(lipschitz, kTinyLipschitz);
  const double fixed_step = 1.0 / lipschitz;

  Vec w = Vec::Zero(dim);
  Vec grad(dim), next(dim);
  double step = fixed_step;
  double gap = std::numeric_limits<double>::infinity();

  for (long it = 0; it < cfg.max_iterations; ++it) {
    grad.setZero();
    problem.gradient(w, grad);

    if (cfg.step_rule == StepRule::FixedInverseSmoothness) {
      next = w - fixed_step * grad;
      if (ball) next = project_to_ball(next, *ball);
      gap = (w - next).norm() / fixed_step;
    } else {
      const double fw = problem.value(w);
      step = std::min(step * 2.0, 1e6 * fixed_step);
      for (;;) {
        next = w - step * grad;
        if (ball) next = project_to_ball(next, *ball);
        const Vec d = next - w;
        const double fn = problem.value(next);
        const double model = fw + grad.dot(d) + d.squaredNorm() / (2.0 * step);
        if (fn <= model + 1e-15 * (1.0 + std::abs(fw))) break;
        step *= 0.5;
        if (step < 1e-18 * fixed_step) {
          throw NumericalError(std::string(what) +
                               ": backtracking step underflow");
        }
      }
      gap = (w - next).norm() / step;
    }

    w.swap(next);
    if (cfg.objective_trace) cfg.objective_trace->push_back(problem.value(w));
    if (gap <= cfg.gradient_tolerance) return w;
  }
  throw ConvergenceError(std::string(what) + ": no convergence within " +
                             std::to_string(cfg.max_iterations) +
                             " iterations, last gradient norm " +
                             std::to_string(gap),
                         gap);
}

struct SingleViewProblem {
  const ViewLoss* loss;
  const QuadraticRegularizer* reg;  // may be null

  double value(const Vec& w) const {
    double v = loss->value(w);
    if (reg) v += reg->value(w);
    return v;
  }
  void gradient(const Vec& w, Vec& g) const {
    loss->add_gradient(w, g);
    if (reg) g.noalias() += reg->gradient(w);
  }
};

}  // namespace

QuadraticRegularizer QuadraticRegularizer::ridge(double nu, Vec center) {
  if (nu < 0.0) throw InvalidInput("ridge weight must be nonnegative");
  QuadraticRegularizer reg;
  reg.scalar = nu;
  reg.center = std::move(center);
  return reg;
}

QuadraticRegularizer QuadraticRegularizer::quadratic_form(Mat q, Vec center) {
  if (q.rows() != q.cols()) throw InvalidInput("regularizer matrix not square");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if (((q - q.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale) {
    throw InvalidInput("regularizer matrix not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  if (es.eigenvalues()(0) < -1e-10 * scale) {
    throw InvalidInput("regularizer matrix not positive semidefinite: "
                       "eigenvalue " +
                       std::to_string(es.eigenvalues()(0)));
  }
  QuadraticRegularizer reg;
  reg.matrix = std::move(q);
  reg.center = std::move(center);
  return reg;
}

double QuadraticRegularizer::value(const Vec& w) const {
  const Vec d = center.size() > 0 ? Vec(w - center) : w;
  if (scalar) return 0.5 * *scalar * d.squaredNorm();
  if (matrix) return 0.5 * d.dot(*matrix * d);
  return 0.0;
}

Vec QuadraticRegularizer::gradient(const Vec& w) const {
  const Vec d = center.size() > 0 ? Vec(w - center) : w;
  if (scalar) return *scalar * d;
  if (matrix) return *matrix * d;
  return Vec::Zero(w.size());
}

double QuadraticRegularizer::lipschitz() const {
  if (scalar) return *scalar;
  if (matrix) {
    Eigen::SelfAdjointEigenSolver<Mat> es(*matrix);
    return std::max(0.0, es.eigenvalues()(matrix->rows() - 1));
  }
  return 0.0;
}

double QuadraticRegularizer::strong_convexity() const {
  if (scalar) return *scalar;
  if (matrix) {
    Eigen::SelfAdjointEigenSolver<Mat> es(*matrix);
    return es.eigenvalues()(0);
  }
  return 0.0;
}

Vec project_to_ball(const Vec& w, double B) {
  if (B <= 0.0) throw InvalidInput("ball radius must be positive");
  const double norm = w.norm();
  if (norm <= B) return w;
  return w * (B / norm);
}

Predictor constrained_erm(const Mat& xs, const Vec& ys, const LossSpec& spec,
                          double B, const SolverConfig& cfg) {
  if (B <= 0.0) throw InvalidInput("ball radius must be positive");
  ViewLoss loss;
  loss.init(xs, ys, spec);
  SingleViewProblem problem{&loss, nullptr};
  Predictor p;
  p.weights = solve_projected_gradient(problem, loss.dim, loss.smoothness(), B,
                                       cfg, "constrained_erm");
  p.norm_bound = B;
  return p;
}

Predictor regularized_erm(const Mat& xs, const Vec& ys, const LossSpec& spec,
                          const QuadraticRegularizer& reg,
                          std::optional<double> B, const SolverConfig& cfg) {
  if (reg.center.size() > 0 && reg.center.size() != xs.cols()) {
    throw InvalidInput("regularizer center dimension mismatch");
  }
  if (reg.strong_convexity() <= 0.0 && !B) {
    throw InvalidInput("ill-posed problem: regularizer is not strictly convex "
                       "and no ball constraint was given");
  }
  ViewLoss loss;
  loss.init(xs, ys, spec);
  SingleViewProblem problem{&loss, &reg};
  Predictor p;
  p.weights =
      solve_projected_gradient(problem, loss.dim,
                               loss.smoothness() + reg.lipschitz(), B, cfg,
                               "regularized_erm");
  p.norm_bound = B;
  return p;
}

double gamma_lemma1(double beta, double radius, double l_star, double B,
                    long n) {
  if (beta <= 0.0 || radius <= 0.0 || B <= 0.0 || n < 1 || l_star < 0.0) {
    throw InvalidInput("gamma_lemma1: invalid parameters");
  }
  const double br2 = beta * radius * radius;
  const double base = 8.0 * br2 / static_cast<double>(n);
  return base +
         std::sqrt(base * base +
                    16.0 * br2 * l_star / (static_cast<double>(n) * B * B));
}

double nu_theorem1(double beta, double radius, double l_w_star, double S,
                   long n) {
  // Identical closed form with the class radius replaced by the agreement
  // radius S.
  return gamma_lemma1(beta, radius, l_w_star, S, n);
}

MultitaskParams multitask_params(double beta, double radius, double b_w,
                                 double b_v, double s_agreement, double lambda1,
                                 double l_star, long n) {
  if (beta <= 0.0 || radius <= 0.0 || b_w <= 0.0 || b_v <= 0.0 ||
      s_agreement <= 0.0 || l_star < 0.0 || n < 1) {
    throw InvalidInput("multitask_params: invalid parameters");
  }
  if (lambda1 < 0.0 || lambda1 > 1.0) {
    throw InvalidInput("multitask_params: lambda1 must lie in [0, 1]");
  }
  const double b2 = b_w * b_w + b_v * b_v;
  const double s2 = s_agreement * s_agreement;
  const double denom = (b2 + s2) * (b2 + s2) - lambda1 * lambda1 * b2 * b2;
  if (denom <= 0.0) {
    throw NumericalError("singular parameters: (B^2+S^2)^2 must exceed "
                         "lambda1^2 B^4");
  }
  MultitaskParams params;
  params.d_squared = b2 * s2 * (b2 + s2) / denom;
  params.alpha = beta * radius * radius * params.d_squared;
  const double base = 8.0 * params.alpha / static_cast<double>(n);
  params.delta =
      base + std::sqrt(base * base +
                       8.0 * params.alpha * l_star / static_cast<double>(n));
  params.gamma = params.delta / b2;
  params.nu = params.delta / s2;
  const double total = params.gamma + params.nu;
  params.beta_prime = total * beta * radius * radius /
                      (total * total - lambda1 * lambda1 * params.nu * params.nu);
  return params;
}

namespace {

// Joint objective in the concatenated raw variable p = [w; v]. The agreement
// penalty is evaluated through the basis, i.e. against the population
// quadratic the basis encodes.
struct JointProblem {
  const ViewLoss* loss_x;
  const ViewLoss* loss_z;
  const CcaBasis* basis;
  double gamma;
  double nu;
  int dx;
  int dz;

  double value(const Vec& p) const {
    const Vec w = p.head(dx);
    const Vec v = p.tail(dz);
    const double agreement = agreement_quadratic(*basis, w, v).total;
    return loss_x->value(w) + loss_z->value(v) +
           0.5 * gamma * p.squaredNorm() + 0.5 * nu * agreement;
  }

  void gradient(const Vec& p, Vec& g) const {
    const Vec w = p.head(dx);
    const Vec v = p.tail(dz);
    Vec gw = Vec::Zero(dx);
    Vec gv = Vec::Zero(dz);
    loss_x->add_gradient(w, gw);
    loss_z->add_gradient(v, gv);

    const Vec w_tilde = basis->u_dual.transpose() * w;
    const Vec v_tilde = basis->v_dual.transpose() * v;
    Vec shrink(dx);  // w_tilde - Lambda v_tilde
    for (int i = 0; i < dx; ++i) {
      const double vt = i < dz ? v_tilde(i) : 0.0;
      shrink(i) = w_tilde(i) - basis->lambda(i) * vt;
    }
    Vec resid(dz);  // -Lambda' shrink + (I - Lambda^2) v_tilde
    for (int i = 0; i < dz; ++i) {
      const double li = basis->lambda(i);
      resid(i) = (1.0 - li * li) * v_tilde(i);
      if (i < dx) resid(i) -= li * shrink(i);
    }
    gw.noalias() += nu * (basis->u_dual * shrink);
    gv.noalias() += nu * (basis->v_dual * resid);

    g.head(dx) = gw + gamma * w;
    g.tail(dz) = gv + gamma * v;
  }
};

double operator_norm_sq(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m.transpose() * m);
  return std::max(0.0, es.eigenvalues()(m.cols() - 1));
}

}  // namespace

std::pair<Predictor, Predictor> joint_coregularized_erm(
    const std::vector<PairedSample>& data, const LossSpec& spec,
    const MultitaskParams& params, const CcaBasis& basis,
    const SolverConfig& cfg) {
  if (data.empty()) throw InvalidInput("empty training data");
  if (params.gamma < 0.0 || params.nu < 0.0 ||
      params.gamma + params.nu <= 0.0) {
    throw InvalidInput("joint_coregularized_erm: singular parameters");
  }
  const Mat xs = view_matrix(data, View::X);
  const Mat zs = view_matrix(data, View::Z);
  const Vec ys = label_vector(data);
  if (xs.cols() != basis.d_x() || zs.cols() != basis.d_z()) {
    throw InvalidInput("data dimensions do not match the basis");
  }

  ViewLoss loss_x, loss_z;
  loss_x.init(xs, ys, spec);
  loss_z.init(zs, ys, spec);

  JointProblem problem{&loss_x, &loss_z, &basis,
                       params.gamma, params.nu, basis.d_x(), basis.d_z()};

  const double lambda1 = basis.lambda(0);
  const double dual_gain = std::max(operator_norm_sq(basis.u_dual),
                                    operator_norm_sq(basis.v_dual));
  const double lipschitz =
      std::max(loss_x.smoothness(), loss_z.smoothness()) + params.gamma +
      params.nu * (1.0 + lambda1) * dual_gain;

  const Vec p = solve_projected_gradient(problem, basis.d_x() + basis.d_z(),
                                         lipschitz, std::nullopt, cfg,
                                         "joint_coregularized_erm");
  Predictor w;
  w.weights = p.head(basis.d_x());
  w.view = View::X;
  Predictor v;
  v.weights = p.tail(basis.d_z());
  v.view = View::Z;
  return {std::move(w), std::move(v)};
}

}  // namespace mvt
