#pragma once

#include "mvt/common.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mvt {

// One two-view observation. The label is optional so unlabeled pools reuse
// the same type.
struct PairedSample {
  Vec x;
  Vec z;
  std::optional<double> y;
};

struct CovarianceEstimate {
  Mat sigma_xx;
  Mat sigma_zz;
  Mat sigma_xz;
  // Samples behind the estimate; 0 marks an exact population covariance
  // supplied directly.
  std::int64_t sample_count = 0;
};

// Fitted CCA coordinate system.
//
// u_full / v_full carry data into CCA coordinates (x_tilde = u_full^T x has
// unit variance per coordinate under the fitted covariance). u_dual / v_dual
// carry predictors (w_tilde = u_dual^T w) so that
// <w_tilde, x_tilde> = <w, x>. Under identity covariance all four maps
// coincide with the orthogonal direction matrices of the SVD.
struct CcaBasis {
  Mat u_full;
  Mat v_full;
  Mat u_dual;
  Mat v_dual;
  Vec correlations;  // length min(d_x, d_z), descending, clipped to [0, 1]
  int rank = 0;

  int d_x() const { return static_cast<int>(u_full.rows()); }
  int d_z() const { return static_cast<int>(v_full.rows()); }

  // lambda_i with the convention lambda_i = 0 beyond the stored list.
  double lambda(int i) const {
    return (i >= 0 && i < correlations.size()) ? correlations(i) : 0.0;
  }
};

// Per-coordinate split of E||w'x - v'z||^2 into shrinkage and residual
// terms; total is their sum by construction.
struct AgreementDecomposition {
  Vec shrinkage_terms;  // (w_tilde_i - lambda_i v_tilde_i)^2, length d_x
  Vec residual_terms;   // (1 - lambda_i^2) v_tilde_i^2, length d_z
  double total = 0.0;
};

// Empirical second-moment matrices. Data is assumed zero-mean; `center`
// subtracts the empirical means first.
CovarianceEstimate estimate_covariances(const std::vector<PairedSample>& data,
                                        bool center = false);

// Whitens both views with (sigma + ridge I)^{-1/2}, takes the full SVD of
// the whitened cross-covariance and composes directions with the whitening
// maps. ridge defaults to 1e-6 * trace / dim per view.
CcaBasis fit_cca(const CovarianceEstimate& cov,
                 std::optional<double> ridge = std::nullopt);

// Builds a basis directly from orthonormal direction matrices; this is the
// identity-covariance case where data and predictor maps coincide.
CcaBasis basis_from_directions(Mat u, Mat v, Vec correlations);

// Predictor transforms: w_tilde = u_dual^T w and its inverse.
Vec to_cca_coords(const CcaBasis& basis, const Vec& w, View view);
Vec from_cca_coords(const CcaBasis& basis, const Vec& w_tilde, View view);

// Data transforms: x_tilde = u_full^T x and its inverse.
Vec to_cca_coords_data(const CcaBasis& basis, const Vec& sample, View view);
Vec from_cca_coords_data(const CcaBasis& basis, const Vec& tilde, View view);

// Maps a view-z predictor to a view-x predictor by shrinking each CCA
// coordinate by lambda_i.
Vec t_cca(const CcaBasis& basis, const Vec& v);

AgreementDecomposition agreement_quadratic(const CcaBasis& basis, const Vec& w,
                                           const Vec& v);

// (1/n) sum (w'x_i - v'z_i)^2 over a paired sample.
double agreement_monte_carlo(const std::vector<PairedSample>& data,
                             const Vec& w, const Vec& v);

// Regularizer matrix of the co-regularized objective in CCA coordinates:
// [[(gamma+nu) I, -nu L], [-nu L', (gamma+nu) I]] with L the rectangular
// diagonal of canonical correlations.
Mat coregularizer_matrix(const CcaBasis& basis, double gamma, double nu);

// Diagonal of ((gamma+nu) I - nu^2/(gamma+nu) L L')^{-1}: the top-left
// block of the inverse of the regularizer matrix.
Vec block_inverse_xx(double gamma, double nu, const Vec& correlations,
                     int d_x = -1);

// Population covariance encoded by a basis, i.e. the matrices against which
// the decomposition identities hold exactly (for a fitted basis this is the
// fitted covariance plus the whitening ridge).
Mat encoded_sigma_xx(const CcaBasis& basis);
Mat encoded_sigma_zz(const CcaBasis& basis);
Mat encoded_sigma_xz(const CcaBasis& basis);

// Row-per-sample matrix of one view, and the label vector (throws on a
// missing label).
Mat view_matrix(const std::vector<PairedSample>& data, View view);
Vec label_vector(const std::vector<PairedSample>& data);

}  // namespace mvt
