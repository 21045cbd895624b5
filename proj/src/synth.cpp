#include "mvt/synth.hpp"

#include <Eigen/QR>

#include <cmath>
#include <random>

namespace mvt {

namespace {

// Orthogonal matrix from the QR of a seeded Gaussian square matrix, with the
// sign fixed so the R factor has a positive diagonal.
Mat random_orthogonal(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

Mat random_orthogonal(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  return random_orthogonal(dim, rng);
}

CanonicalPairModel make_canonical_pair_model(int d_x, int d_z, Vec lambdas,
                                             std::uint64_t seed) {
  if (d_x <= 0 || d_z <= 0) throw InvalidInput("dimensions must be positive");
  const int r = static_cast<int>(lambdas.size());
  if (r < 1 || r > std::min(d_x, d_z)) {
    throw InvalidInput("rank must lie in [1, min(d_x, d_z)]");
  }
  for (int i = 0; i < r; ++i) {
    if (lambdas(i) < 0.0 || lambdas(i) > 1.0) {
      throw InvalidInput("lambdas must lie in [0, 1]");
    }
    if (i > 0 && lambdas(i) > lambdas(i - 1)) {
      throw InvalidInput("lambdas must be descending");
    }
  }
  CanonicalPairModel model;
  model.d_x = d_x;
  model.d_z = d_z;
  model.r = r;
  model.lambdas = std::move(lambdas);

  std::mt19937_64 rng(splitmix64(seed));
  model.phi_completion = random_orthogonal(d_x, rng);
  model.psi_completion = random_orthogonal(d_z, rng);
  model.phi = model.phi_completion.leftCols(r);
  model.psi = model.psi_completion.leftCols(r);
  return model;
}

CovarianceEstimate population_covariance(const CanonicalPairModel& model) {
  CovarianceEstimate cov;
  cov.sigma_xx = Mat::Identity(model.d_x, model.d_x);
  cov.sigma_zz = Mat::Identity(model.d_z, model.d_z);
  cov.sigma_xz =
      model.phi * model.lambdas.asDiagonal() * model.psi.transpose();
  cov.sample_count = 0;
  return cov;
}

double feature_radius(int dim) { return std::sqrt(static_cast<double>(dim)) + 3.0; }

std::vector<PairedSample> sample_paired(const CanonicalPairModel& model,
                                        const LabelModel& labels, long n,
                                        std::uint64_t seed,
                                        BoundednessMode mode) {
  if (n < 1) throw InvalidInput("sample count must be positive");
  if (labels.w_star.size() != model.d_x) {
    throw InvalidInput("w_star dimension must equal d_x");
  }
  std::mt19937_64 rng(splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ull));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double radius_x = feature_radius(model.d_x);
  const double radius_z = feature_radius(model.d_z);

  std::vector<PairedSample> out;
  out.reserve(static_cast<std::size_t>(n));
  Vec x_tilde(model.d_x), z_tilde(model.d_z);
  for (long k = 0; k < n; ++k) {
    PairedSample s;
    for (;;) {
      // Shared latent on the first r coordinates; the rest is independent.
      for (int i = 0; i < model.d_x; ++i) x_tilde(i) = normal(rng);
      for (int i = 0; i < model.d_z; ++i) z_tilde(i) = normal(rng);
      for (int i = 0; i < model.r; ++i) {
        const double li = model.lambdas(i);
        const double t = normal(rng);
        x_tilde(i) = std::sqrt(li) * t + std::sqrt(1.0 - li) * x_tilde(i);
        z_tilde(i) = std::sqrt(li) * t + std::sqrt(1.0 - li) * z_tilde(i);
      }
      s.x = model.phi_completion * x_tilde;
      s.z = model.psi_completion * z_tilde;
      if (mode == BoundednessMode::Quantile ||
          (s.x.norm() <= radius_x && s.z.norm() <= radius_z)) {
        break;
      }
    }
    const double decision = labels.w_star.dot(s.x);
    if (labels.kind == LabelKind::RegressionGaussianNoise) {
      s.y = decision + labels.noise_std * normal(rng);
    } else {
      s.y = unif(rng) < sigmoid(decision) ? 1.0 : -1.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double planted_optimal_loss(const CanonicalPairModel& model,
                            const LabelModel& labels, double B) {
  (void)model;
  if (labels.kind != LabelKind::RegressionGaussianNoise) {
    throw InvalidInput("planted_optimal_loss has a closed form only for "
                       "regression labels");
  }
  const double norm = labels.w_star.norm();
  const double noise_part = 0.5 * labels.noise_std * labels.noise_std;
  if (norm <= B) return noise_part;
  const double gap = norm - B;
  return 0.5 * gap * gap + noise_part;
}

Vec view_z_optimum(const CanonicalPairModel& model, const LabelModel& labels) {
  if (labels.w_star.size() != model.d_x) {
    throw InvalidInput("w_star dimension must equal d_x");
  }
  return model.psi * model.lambdas.asDiagonal() *
         (model.phi.transpose() * labels.w_star);
}

}  // namespace mvt
