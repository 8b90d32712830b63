#include "msfilter/kalman.hpp"

#include <string>

#include "msfilter/errors.hpp"
#include "msfilter/linalg.hpp"

namespace msf {

MeasurePath kalman_bucy(const LinearSpec& spec, const ObservationPath& obs,
                        const KalmanOptions& opts) {
  const int p = spec.p();
  const int K = static_cast<int>(obs.times.size()) - 1;
  if (K < 1) throw GridMismatch("observation path needs at least two grid points");

  MeasurePath out;
  out.kind = MeasurePath::Kind::kalman;
  out.times = obs.times;
  out.slow_dim = p;
  out.gaussians.resize(K + 1);

  Eigen::VectorXd m = spec.m0;
  Eigen::MatrixXd P = spec.P0;
  const Eigen::MatrixXd Q = spec.Sigma * spec.Sigma.transpose();
  const Eigen::MatrixXd SalphaT = spec.Sigma * spec.alpha.transpose();
  out.gaussians[0] = GaussianState{m, P};

  Eigen::VectorXd dy(spec.d()), innov(spec.d());
  Eigen::MatrixXd G(p, spec.d()), dP(p, p);

  for (int k = 0; k < K; ++k) {
    const double dt = obs.times[k + 1] - obs.times[k];
    dy = (obs.Y.row(k + 1) - obs.Y.row(k)).transpose();
    G.noalias() = P * spec.H.transpose();
    G += SalphaT;
    innov = dy - (spec.H * m + spec.h0) * dt;
    m += (spec.A * m + spec.a0) * dt;
    m.noalias() += G * innov;
    dP.noalias() = spec.A * P;
    dP += dP.transpose().eval();
    dP += Q;
    dP.noalias() -= G * G.transpose();
    P += dt * dP;
    P = 0.5 * (P + P.transpose()).eval();

    if (!m.allFinite() || !P.allFinite()) {
      throw CovarianceBlowup("kalman state not finite at t=" + std::to_string(obs.times[k + 1]));
    }
    const double floor = -opts.eig_tol * std::max(1.0, P.norm());
    if (min_symmetric_eigenvalue(P) < floor) {
      throw CovarianceBlowup("covariance lost positive semidefiniteness at t=" +
                             std::to_string(obs.times[k + 1]));
    }
    out.gaussians[k + 1] = GaussianState{m, P};
  }
  return out;
}

}  // namespace msf
