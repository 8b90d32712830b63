#include "msfilter/linalg.hpp"

#include <string>

#include "msfilter/errors.hpp"

namespace msf {

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& K, double tol) {
  const Eigen::MatrixXd sym = 0.5 * (K + K.transpose());
  const double floor = tol * std::max(1.0, sym.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= floor) {
    throw NonPositiveDefinite("matrix is not strictly positive definite (min eigenvalue " +
                              std::to_string(es.eigenvalues().minCoeff()) + ")");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NonPositiveDefinite("Cholesky factorization failed");
  }
  return llt.matrixL();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double* min_eig) {
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw FactorizationFailure("symmetric eigendecomposition failed");
  }
  if (min_eig != nullptr) *min_eig = es.eigenvalues().minCoeff();
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

double min_symmetric_eigenvalue(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace msf
