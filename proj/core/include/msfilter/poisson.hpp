#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msfilter/stationary.hpp"

namespace msf {

struct PoissonParams {
  double t_max = 0.0;           // 0: auto = 20x the empirical mixing time
  double dt = 0.01;             // quadrature and simulation step
  int path_pairs = 64;          // antithetic path pairs per evaluation
  double deriv_rel_step = 1e-3; // dx_i = deriv_rel_step * (1 + |x_i|)
  double truncation_tol = 0.02; // TruncationWarning when T_{t_max} b_I is still this large
  StationaryParams stationary;  // centering batch and mixing-time estimate
};

// Solution of the cell problem G_F u = -b_I with the centering
// normalization int u dmu_inf = 0, realized as the time-integrated
// semigroup u(x,z) = int_0^{t_max} T_s(b_I(x,.))(z) ds. Quadrature is
// trapezoidal over a fixed set of antithetic path pairs (common random
// numbers: every evaluation at this solution's seed reuses the same noise,
// so finite differences in x cancel the path noise). The additive constant
// is fixed by subtracting the mu_inf-average of the raw integral, estimated
// from stationary starting points.
class CellProblemSolution {
 public:
  CellProblemSolution(const MultiscaleModel& model, Eigen::VectorXd x, PoissonParams params,
                      std::uint64_t seed);

  // u(x, z)
  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const;

  // Jacobian du/dx (m x m): column i is the central difference
  // (u(x + dx_i e_i, z) - u(x - dx_i e_i, z)) / (2 dx_i) under common noise.
  Eigen::MatrixXd evaluate_dx(const Eigen::VectorXd& z) const;

  double t_max() const { return t_max_; }
  int mc_paths() const { return 2 * params_.path_pairs; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const Eigen::VectorXd& x() const { return x_; }

 private:
  Eigen::VectorXd raw_integral(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  const Eigen::VectorXd& offset_for(const Eigen::VectorXd& x) const;

  const MultiscaleModel* model_;
  Eigen::VectorXd x_;
  PoissonParams params_;
  std::uint64_t seed_;
  double t_max_ = 0.0;
  int steps_ = 0;
  std::vector<std::string> warnings_;
  // Offsets are reused across evaluate() calls; the cache holds the base x
  // and the 2m shifted points touched by evaluate_dx.
  mutable std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> offset_cache_;
};

CellProblemSolution solve_poisson(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                  const PoissonParams& params, std::uint64_t seed);

// mu_inf-average of b_I(x, .): the residual that must vanish for the
// intermediate drift to admit a cell-problem solution. se (when requested)
// is the ESS-adjusted standard error per component.
Eigen::VectorXd check_centering(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                const StationaryParams& params, std::uint64_t seed,
                                Eigen::VectorXd* se = nullptr);

// Finite-difference frozen-fast generator applied to a callable u: R^n -> R^k,
// used to verify G_F u = -b_I at probe points:
//   (G_F u)(z) = sum_i f_i d_i u + 0.5 sum_ij (g g^T)_ij d_ij u.
Eigen::VectorXd fd_generator(const MultiscaleModel& model, const Eigen::VectorXd& x,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& u,
                             int u_dim, const Eigen::VectorXd& z, double dz = 0.05);

}  // namespace msf
