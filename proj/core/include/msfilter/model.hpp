#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "msfilter/rng.hpp"

namespace msf {

// Coefficient callbacks write into a caller-owned buffer; the simulator and
// filters sit in tight loops and must not allocate per evaluation.
using VecFn =
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Eigen::VectorXd& out)>;
using MatFn =
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Eigen::MatrixXd& out)>;
using InitFn = std::function<void(RngStream& rng, Eigen::VectorXd& x0, Eigen::VectorXd& z0)>;

struct ModelFlags {
  bool centered_drift = false;       // intermediate drift averages to zero under the fast law
  bool bounded_observation = false;  // h bounded
  bool linear_gaussian = false;      // all coefficients affine, Gaussian init: Kalman oracle applies
};

// Whitened observation geometry. kappa is the lower Cholesky factor of
// K = alpha alpha^T + gamma gamma^T; alpha_w = kappa^{-1} alpha and
// gamma_w = kappa^{-1} gamma satisfy alpha_w alpha_w^T + gamma_w gamma_w^T = I.
struct Correlation {
  Eigen::MatrixXd K;
  Eigen::MatrixXd kappa;
  Eigen::MatrixXd kappa_inv;
  Eigen::MatrixXd alpha_w;
  Eigen::MatrixXd gamma_w;
};

// Splits the slow noise against the whitened observation noise:
// W = proj^T B + C N with proj = alpha_w^T and C C^T = I_w - alpha_w^T alpha_w,
// N independent of B. C is the symmetric PSD root.
struct NoiseDecomposition {
  Eigen::MatrixXd proj;  // w x d
  Eigen::MatrixXd C;     // w x w
};

// Slow/fast/observation system
//   dX = [b + b_I/eps] dt + sigma dW          (R^m, noise R^w)
//   dZ = f/eps^2 dt + g/eps dV                (R^n, noise R^v)
//   dY = h dt + alpha dW + gamma dU           (R^d, extra noise R^u)
// After whiten() the observation channel satisfies
// alpha alpha^T + gamma gamma^T = I and downstream code assumes it.
struct MultiscaleModel {
  int m = 0, n = 0, w = 0, v = 0, u = 0, d = 0;

  VecFn b;       // R^m
  VecFn b_I;     // R^m
  MatFn sigma;   // m x w
  VecFn f;       // R^n
  MatFn g;       // n x v
  VecFn h;       // R^d
  Eigen::MatrixXd alpha;  // d x w
  Eigen::MatrixXd gamma;  // d x u
  InitFn init;

  ModelFlags flags;
  bool whitened = false;
  Correlation correlation;  // populated by whiten()
};

// Builds the whitened geometry. Throws NonPositiveDefinite when gamma gamma^T
// or K fails strict positivity.
Correlation build_correlation(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& gamma);

// Throws FactorizationFailure when I - alpha_w^T alpha_w has an eigenvalue
// below -tol (only possible for inputs that are not actually whitened).
NoiseDecomposition decompose_noise(const Correlation& corr, double tol = 1e-10);

// Returns the model with h, alpha, gamma replaced by their whitened versions
// and `correlation` filled in. Idempotent guard: whitening twice throws.
MultiscaleModel whiten(const MultiscaleModel& raw);

}  // namespace msf
