#pragma once

#include <Eigen/Dense>

#include "msfilter/measure_path.hpp"
#include "msfilter/sde.hpp"

namespace msf {

// Linear-Gaussian system in whitened observation coordinates:
//   dX = (A X + a0) dt + Sigma dW            (state R^p, signal noise R^q)
//   dY = (H X + h0) dt + alpha dW + gamma dU (obs R^d)
// with alpha alpha^T + gamma gamma^T = I. Only alpha enters the recursion
// (through the gain term Sigma alpha^T); gamma is implicit.
struct LinearSpec {
  Eigen::MatrixXd A;      // p x p
  Eigen::VectorXd a0;     // p
  Eigen::MatrixXd Sigma;  // p x q
  Eigen::MatrixXd H;      // d x p
  Eigen::VectorXd h0;     // d
  Eigen::MatrixXd alpha;  // d x q
  Eigen::VectorXd m0;     // p
  Eigen::MatrixXd P0;     // p x p

  int p() const { return static_cast<int>(A.rows()); }
  int d() const { return static_cast<int>(H.rows()); }
};

struct KalmanOptions {
  // CovarianceBlowup guard: symmetric part enforced each step; error when the
  // smallest eigenvalue drops below -eig_tol * max(1, ||P||) or P stops being
  // finite.
  double eig_tol = 1e-8;
};

// Correlated-noise Kalman-Bucy filter, Euler-discretized on the observation
// grid. Gain G = P H^T + Sigma alpha^T;
//   dm = (A m + a0) dt + G (dY - (H m + h0) dt)
//   dP = (A P + P A^T + Sigma Sigma^T - G G^T) dt.
MeasurePath kalman_bucy(const LinearSpec& spec, const ObservationPath& obs,
                        const KalmanOptions& opts = {});

}  // namespace msf
