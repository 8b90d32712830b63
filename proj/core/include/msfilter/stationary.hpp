#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msfilter/model.hpp"

namespace msf {

// All cell-problem operations run the frozen-fast process at unit scale:
//   dZ = f(x, Z) dt + g(x, Z) dV, with the slow coordinate x held fixed.
// This is the generator that drives the fast dynamics once the eps clock is
// factored out, so no eps appears anywhere in this module.
struct FrozenFastStepper {
  FrozenFastStepper(const MultiscaleModel& model, Eigen::VectorXd x, double dt);

  // One Euler-Maruyama step in place.
  void step(Eigen::VectorXd& z, RngStream& rng);

  const MultiscaleModel* model;
  Eigen::VectorXd x;
  double dt, sq_dt;
  Eigen::VectorXd fv, dv;
  Eigen::MatrixXd gv;
};

struct StationaryParams {
  double dt = 0.01;
  double burn_in_time = 10.0;
  int n_samples = 512;
  double thin_time = 0.5;
  double ess_floor = 64.0;   // ErgodicityWarning below this
  double blowup_norm = 1e8;
};

struct StationaryEstimate {
  Eigen::MatrixXd samples;  // n_samples x n, thinned single-trajectory draws
  int burn_in = 0;          // steps discarded
  int thinning = 0;         // steps between retained samples
  double ess = 0.0;         // autocorrelation-adjusted, min over components
  std::vector<std::string> warnings;

  Eigen::VectorXd mean() const { return samples.colwise().mean(); }
};

// Long-run sampler for the frozen-fast invariant law mu_inf(x). The ESS
// comes from the integrated autocorrelation of each component of the thinned
// chain; an ESS below params.ess_floor appends an ErgodicityWarning (the
// estimate is still returned; warnings are advisory).
StationaryEstimate estimate_stationary(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                       const StationaryParams& params, std::uint64_t seed);

// Time scale on which autocorrelation of b_I(x, Z_t) along the frozen-fast
// path decays by a factor e. Returns a small default when b_I vanishes.
double estimate_mixing_time(const MultiscaleModel& model, const Eigen::VectorXd& x,
                            const StationaryParams& params, std::uint64_t seed);

using ZFn = std::function<void(const Eigen::VectorXd& z, Eigen::VectorXd& out)>;

struct SemigroupEstimate {
  Eigen::VectorXd value;  // E[phi(Z_t) | Z_0 = z0], one entry per phi component
  Eigen::VectorXd se;     // Monte Carlo standard error
  int n_paths = 0;
};

// Frozen-fast semigroup action by plain Monte Carlo. t = 0 returns phi(z0)
// exactly with zero stderr. Per-path streams are pre-split, so the estimate
// is independent of evaluation order.
SemigroupEstimate semigroup_mc(const MultiscaleModel& model, const Eigen::VectorXd& x,
                               const ZFn& phi, int phi_dim, double t, const Eigen::VectorXd& z0,
                               int n_paths, double dt, std::uint64_t seed);

}  // namespace msf
