#pragma once

#include "mvt/cca.hpp"
#include "mvt/common.hpp"

#include <cstdint>
#include <vector>

namespace mvt {

// Paired-view Gaussian with identity marginals and cross-covariance
// phi diag(lambdas) psi'.
struct CanonicalPairModel {
  int d_x = 0;
  int d_z = 0;
  int r = 0;
  Mat phi;  // d_x x r, orthonormal columns
  Mat psi;  // d_z x r, orthonormal columns
  Vec lambdas;  // length r, descending in [0, 1]
  Mat phi_completion;  // d_x x d_x orthogonal, first r columns = phi
  Mat psi_completion;  // d_z x d_z orthogonal, first r columns = psi
};

enum class LabelKind { RegressionGaussianNoise, LogisticBernoulli };

struct LabelModel {
  Vec w_star;  // planted view-x predictor
  double noise_std = 0.0;
  LabelKind kind = LabelKind::RegressionGaussianNoise;
};

// Quantile mode leaves samples unbounded and uses feature_radius() only in
// the rate formulas; Strict mode rejection-samples until both views fit
// inside their radius.
enum class BoundednessMode { Quantile, Strict };

// Orthonormal factors come from the QR of a seeded Gaussian matrix, so the
// model is deterministic per seed.
CanonicalPairModel make_canonical_pair_model(int d_x, int d_z, Vec lambdas,
                                             std::uint64_t seed);

// QR of a seeded Gaussian square matrix with the R diagonal made positive.
Mat random_orthogonal(int dim, std::uint64_t seed);

CovarianceEstimate population_covariance(const CanonicalPairModel& model);

// sqrt(dim) + 3, roughly the 99.9% quantile of ||x|| for a standard normal.
double feature_radius(int dim);

std::vector<PairedSample> sample_paired(
    const CanonicalPairModel& model, const LabelModel& labels, long n,
    std::uint64_t seed, BoundednessMode mode = BoundednessMode::Quantile);

// Optimal expected squared loss over the ball of radius B; closed form,
// regression labels only.
double planted_optimal_loss(const CanonicalPairModel& model,
                            const LabelModel& labels, double B);

// Population least-squares optimum of the view-z predictor for labels
// planted on view x: psi diag(lambdas) phi' w_star.
Vec view_z_optimum(const CanonicalPairModel& model, const LabelModel& labels);

}  // namespace mvt
