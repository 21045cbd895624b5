#include "mvt/cca.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace mvt {

namespace {

void check_view_dims(const std::vector<PairedSample>& data) {
  if (data.empty()) throw InvalidInput("empty sample sequence");
  const auto dx = data.front().x.size();
  const auto dz = data.front().z.size();
  for (const auto& s : data) {
    if (s.x.size() != dx || s.z.size() != dz) {
      throw InvalidInput("sample dimensions do not match the dataset's");
    }
  }
}

struct WhiteningPair {
  Mat forward;  // (sigma + ridge I)^{-1/2}
  Mat inverse;  // (sigma + ridge I)^{+1/2}
};

WhiteningPair whitening_maps(const Mat& sigma, double ridge,
                             const char* which) {
  Mat shifted = sigma;
  shifted.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Mat> es(shifted);
  if (es.info() != Eigen::Success) {
    throw NumericalError(std::string("eigendecomposition failed for ") + which);
  }
  const Vec& eig = es.eigenvalues();
  if (eig(0) <= 0.0) {
    throw NumericalError(std::string("whitening matrix for view ") + which +
                         " is not positive definite after ridge: eigenvalue " +
                         std::to_string(eig(0)));
  }
  WhiteningPair maps;
  maps.forward = es.eigenvectors() *
                 eig.array().rsqrt().matrix().asDiagonal() *
                 es.eigenvectors().transpose();
  maps.inverse = es.eigenvectors() *
                 eig.array().sqrt().matrix().asDiagonal() *
                 es.eigenvectors().transpose();
  return maps;
}

const Mat& data_map(const CcaBasis& basis, View view) {
  if (view == View::X) return basis.u_full;
  if (view == View::Z) return basis.v_full;
  throw InvalidInput("coordinate transforms take view X or Z");
}

const Mat& dual_map(const CcaBasis& basis, View view) {
  if (view == View::X) return basis.u_dual;
  if (view == View::Z) return basis.v_dual;
  throw InvalidInput("coordinate transforms take view X or Z");
}

void check_dim(const Vec& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw InvalidInput(std::string(what) + ": dimension " +
                       std::to_string(v.size()) + " does not match " +
                       std::to_string(expected));
  }
}

}  // namespace

CovarianceEstimate estimate_covariances(const std::vector<PairedSample>& data,
                                        bool center) {
  if (data.size() < 2) {
    throw InvalidInput("covariance estimation needs at least 2 samples");
  }
  check_view_dims(data);
  Mat xs = view_matrix(data, View::X);
  Mat zs = view_matrix(data, View::Z);
  if (center) {
    xs.rowwise() -= xs.colwise().mean();
    zs.rowwise() -= zs.colwise().mean();
  }
  const double n = static_cast<double>(data.size());
  CovarianceEstimate cov;
  cov.sigma_xx = xs.transpose() * xs / n;
  cov.sigma_zz = zs.transpose() * zs / n;
  cov.sigma_xz = xs.transpose() * zs / n;
  cov.sample_count = static_cast<std::int64_t>(data.size());
  return cov;
}

CcaBasis fit_cca(const CovarianceEstimate& cov, std::optional<double> ridge) {
  const auto dx = cov.sigma_xx.rows();
  const auto dz = cov.sigma_zz.rows();
  if (cov.sigma_xz.rows() != dx || cov.sigma_xz.cols() != dz) {
    throw InvalidInput("cross-covariance dimensions do not match the views");
  }
  const double ridge_x =
      ridge ? *ridge : 1e-6 * cov.sigma_xx.trace() / static_cast<double>(dx);
  const double ridge_z =
      ridge ? *ridge : 1e-6 * cov.sigma_zz.trace() / static_cast<double>(dz);

  const WhiteningPair wx = whitening_maps(cov.sigma_xx, ridge_x, "x");
  const WhiteningPair wz = whitening_maps(cov.sigma_zz, ridge_z, "z");

  const Mat whitened_cross = wx.forward * cov.sigma_xz * wz.forward;
  Eigen::JacobiSVD<Mat> svd(whitened_cross,
                            Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat u = svd.matrixU();
  Mat v = svd.matrixV();
  Vec lambdas = svd.singularValues();
  const auto r_full = lambdas.size();  // min(dx, dz)

  // Empirical correlations can exceed 1 by floating error or finite-sample
  // bias; clip so the (1 - lambda^2) weights stay nonnegative.
  for (Eigen::Index i = 0; i < r_full; ++i) {
    lambdas(i) = std::min(1.0, std::max(0.0, lambdas(i)));
  }

  // Sign normalization: largest-magnitude entry of each view-x raw direction
  // made positive; the paired view-z column flips with it.
  Mat u_raw = wx.forward * u;
  for (Eigen::Index i = 0; i < dx; ++i) {
    Eigen::Index arg = 0;
    u_raw.col(i).cwiseAbs().maxCoeff(&arg);
    if (u_raw(arg, i) < 0.0) {
      u.col(i) = -u.col(i);
      if (i < r_full) v.col(i) = -v.col(i);
    }
  }
  // Unpaired view-z columns get the same convention on their own entries.
  Mat v_raw = wz.forward * v;
  for (Eigen::Index i = r_full; i < dz; ++i) {
    Eigen::Index arg = 0;
    v_raw.col(i).cwiseAbs().maxCoeff(&arg);
    if (v_raw(arg, i) < 0.0) v.col(i) = -v.col(i);
  }

  CcaBasis basis;
  basis.u_full = wx.forward * u;
  basis.v_full = wz.forward * v;
  basis.u_dual = wx.inverse * u;
  basis.v_dual = wz.inverse * v;
  basis.correlations = lambdas;
  basis.rank = 0;
  for (Eigen::Index i = 0; i < r_full; ++i) {
    if (lambdas(i) > 1e-10) ++basis.rank;
  }
  return basis;
}

CcaBasis basis_from_directions(Mat u, Mat v, Vec correlations) {
  if (u.rows() != u.cols() || v.rows() != v.cols()) {
    throw InvalidInput("direction matrices must be square");
  }
  const auto r = std::min(u.rows(), v.rows());
  if (correlations.size() != r) {
    throw InvalidInput("correlations length must be min(d_x, d_z)");
  }
  for (Eigen::Index i = 0; i < r; ++i) {
    if (correlations(i) < 0.0 || correlations(i) > 1.0 + 1e-8) {
      throw InvalidInput("correlations must lie in [0, 1]");
    }
    correlations(i) = std::min(1.0, correlations(i));
  }
  CcaBasis basis;
  basis.u_full = u;
  basis.v_full = v;
  basis.u_dual = std::move(u);
  basis.v_dual = std::move(v);
  basis.correlations = std::move(correlations);
  basis.rank = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (basis.correlations(i) > 1e-10) ++basis.rank;
  }
  return basis;
}

Vec to_cca_coords(const CcaBasis& basis, const Vec& w, View view) {
  const Mat& map = dual_map(basis, view);
  check_dim(w, map.rows(), "to_cca_coords");
  return map.transpose() * w;
}

Vec from_cca_coords(const CcaBasis& basis, const Vec& w_tilde, View view) {
  const Mat& map = data_map(basis, view);
  check_dim(w_tilde, map.cols(), "from_cca_coords");
  return map * w_tilde;
}

Vec to_cca_coords_data(const CcaBasis& basis, const Vec& sample, View view) {
  const Mat& map = data_map(basis, view);
  check_dim(sample, map.rows(), "to_cca_coords_data");
  return map.transpose() * sample;
}

Vec from_cca_coords_data(const CcaBasis& basis, const Vec& tilde, View view) {
  const Mat& map = dual_map(basis, view);
  check_dim(tilde, map.cols(), "from_cca_coords_data");
  return map * tilde;
}

Vec t_cca(const CcaBasis& basis, const Vec& v) {
  check_dim(v, basis.d_z(), "t_cca");
  const Vec v_tilde = basis.v_dual.transpose() * v;
  Vec shrunk = Vec::Zero(basis.d_x());
  const int upto = std::min(basis.d_x(), basis.d_z());
  for (int i = 0; i < upto; ++i) {
    shrunk(i) = basis.lambda(i) * v_tilde(i);
  }
  return basis.u_full * shrunk;
}

AgreementDecomposition agreement_quadratic(const CcaBasis& basis, const Vec& w,
                                           const Vec& v) {
  check_dim(w, basis.d_x(), "agreement_quadratic w");
  check_dim(v, basis.d_z(), "agreement_quadratic v");
  const Vec w_tilde = basis.u_dual.transpose() * w;
  const Vec v_tilde = basis.v_dual.transpose() * v;

  AgreementDecomposition dec;
  dec.shrinkage_terms = Vec::Zero(basis.d_x());
  dec.residual_terms = Vec::Zero(basis.d_z());
  for (int i = 0; i < basis.d_x(); ++i) {
    const double vt = i < basis.d_z() ? v_tilde(i) : 0.0;
    const double diff = w_tilde(i) - basis.lambda(i) * vt;
    dec.shrinkage_terms(i) = diff * diff;
  }
  for (int i = 0; i < basis.d_z(); ++i) {
    const double li = basis.lambda(i);
    dec.residual_terms(i) = (1.0 - li * li) * v_tilde(i) * v_tilde(i);
  }
  dec.total = dec.shrinkage_terms.sum() + dec.residual_terms.sum();
  return dec;
}

double agreement_monte_carlo(const std::vector<PairedSample>& data,
                             const Vec& w, const Vec& v) {
  if (data.empty()) throw InvalidInput("agreement_monte_carlo: empty data");
  check_view_dims(data);
  check_dim(w, data.front().x.size(), "agreement_monte_carlo w");
  check_dim(v, data.front().z.size(), "agreement_monte_carlo v");
  double acc = 0.0;
  for (const auto& s : data) {
    const double diff = w.dot(s.x) - v.dot(s.z);
    acc += diff * diff;
  }
  return acc / static_cast<double>(data.size());
}

Mat coregularizer_matrix(const CcaBasis& basis, double gamma, double nu) {
  if (gamma < 0.0 || nu < 0.0 || gamma + nu <= 0.0) {
    throw InvalidInput("coregularizer_matrix needs gamma, nu >= 0 and "
                       "gamma + nu > 0");
  }
  const int dx = basis.d_x();
  const int dz = basis.d_z();
  Mat m = Mat::Zero(dx + dz, dx + dz);
  m.topLeftCorner(dx, dx) = (gamma + nu) * Mat::Identity(dx, dx);
  m.bottomRightCorner(dz, dz) = (gamma + nu) * Mat::Identity(dz, dz);
  const int r = std::min(dx, dz);
  for (int i = 0; i < r; ++i) {
    m(i, dx + i) = -nu * basis.lambda(i);
    m(dx + i, i) = -nu * basis.lambda(i);
  }
  return m;
}

Vec block_inverse_xx(double gamma, double nu, const Vec& correlations,
                     int d_x) {
  const double total = gamma + nu;
  const double lambda1 = correlations.size() > 0 ? correlations(0) : 0.0;
  if (total * total <= lambda1 * lambda1 * nu * nu) {
    throw NumericalError("singular regularizer: (gamma+nu)^2 must exceed "
                         "lambda1^2 nu^2");
  }
  const int dim = d_x >= 0 ? d_x : static_cast<int>(correlations.size());
  Vec diag(dim);
  for (int i = 0; i < dim; ++i) {
    const double li = i < correlations.size() ? correlations(i) : 0.0;
    diag(i) = 1.0 / (total - nu * nu * li * li / total);
  }
  return diag;
}

Mat encoded_sigma_xx(const CcaBasis& basis) {
  return basis.u_dual * basis.u_dual.transpose();
}

Mat encoded_sigma_zz(const CcaBasis& basis) {
  return basis.v_dual * basis.v_dual.transpose();
}

Mat encoded_sigma_xz(const CcaBasis& basis) {
  const int r = std::min(basis.d_x(), basis.d_z());
  Mat lam = Mat::Zero(basis.d_x(), basis.d_z());
  for (int i = 0; i < r; ++i) lam(i, i) = basis.lambda(i);
  return basis.u_dual * lam * basis.v_dual.transpose();
}

Mat view_matrix(const std::vector<PairedSample>& data, View view) {
  if (data.empty()) throw InvalidInput("empty sample sequence");
  if (view != View::X && view != View::Z) {
    throw InvalidInput("view_matrix takes view X or Z");
  }
  const auto dim =
      view == View::X ? data.front().x.size() : data.front().z.size();
  Mat out(static_cast<Eigen::Index>(data.size()), dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec& row = view == View::X ? data[i].x : data[i].z;
    if (row.size() != dim) {
      throw InvalidInput("sample dimensions do not match the dataset's");
    }
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

Vec label_vector(const std::vector<PairedSample>& data) {
  Vec out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].y) throw InvalidInput("sample without label");
    out(static_cast<Eigen::Index>(i)) = *data[i].y;
  }
  return out;
}

}  // namespace mvt
