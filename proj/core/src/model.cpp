#include "msfilter/model.hpp"

#include <string>

#include "msfilter/errors.hpp"
#include "msfilter/linalg.hpp"

namespace msf {

Correlation build_correlation(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& gamma) {
  if (alpha.rows() != gamma.rows()) {
    throw NonPositiveDefinite("alpha and gamma must have the same row count d");
  }
  const Eigen::MatrixXd gg = gamma * gamma.transpose();
  const double g_floor = 1e-12 * std::max(1.0, gg.norm());
  if (min_symmetric_eigenvalue(gg) <= g_floor) {
    throw NonPositiveDefinite("gamma gamma^T is not strictly positive definite");
  }
  Correlation c;
  c.K = alpha * alpha.transpose() + gg;
  c.kappa = lower_cholesky(c.K);  // throws NonPositiveDefinite
  c.kappa_inv = c.kappa.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(c.K.rows(), c.K.cols()));
  c.alpha_w = c.kappa_inv * alpha;
  c.gamma_w = c.kappa_inv * gamma;
  return c;
}

NoiseDecomposition decompose_noise(const Correlation& corr, double tol) {
  const Eigen::Index w = corr.alpha_w.cols();
  NoiseDecomposition nd;
  nd.proj = corr.alpha_w.transpose();
  const Eigen::MatrixXd residual =
      Eigen::MatrixXd::Identity(w, w) - corr.alpha_w.transpose() * corr.alpha_w;
  double min_eig = 0.0;
  nd.C = psd_sqrt(residual, &min_eig);
  if (min_eig < -tol) {
    throw FactorizationFailure(
        "I - alpha_w^T alpha_w is indefinite (min eigenvalue " + std::to_string(min_eig) +
        "); correlation input is not whitened");
  }
  return nd;
}

MultiscaleModel whiten(const MultiscaleModel& raw) {
  if (raw.whitened) {
    throw FactorizationFailure("model is already whitened");
  }
  MultiscaleModel out = raw;
  out.correlation = build_correlation(raw.alpha, raw.gamma);
  out.alpha = out.correlation.alpha_w;
  out.gamma = out.correlation.gamma_w;
  const Eigen::MatrixXd kinv = out.correlation.kappa_inv;
  VecFn raw_h = raw.h;
  Eigen::VectorXd tmp(raw.d);
  out.h = [raw_h, kinv, tmp](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                             Eigen::VectorXd& o) mutable {
    raw_h(x, z, tmp);
    o.noalias() = kinv * tmp;
  };
  out.whitened = true;
  return out;
}

}  // namespace msf
