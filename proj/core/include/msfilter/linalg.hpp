#pragma once

#include <Eigen/Dense>

namespace msf {

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws NonPositiveDefinite if the smallest eigenvalue is below
// tol * max(1, ||K||).
Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& K, double tol = 1e-12);

// Symmetric PSD square root via eigendecomposition; eigenvalues below zero
// are clipped before the root is formed. If min_eig is non-null it receives
// the smallest (pre-clip) eigenvalue so callers can police how negative the
// input was allowed to be.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double* min_eig = nullptr);

double min_symmetric_eigenvalue(const Eigen::MatrixXd& S);

}  // namespace msf
