#pragma once

#include <functional>

#include <Eigen/Dense>

#include "msfilter/rng.hpp"

namespace msf {

// Weighted particle cloud. states holds one particle per row; the first
// slow_dim columns are the slow components (full-filter particles carry the
// fast components after them). log_weights are relative: constants common to
// all particles live in total_mass, which is the running estimate of the
// unnormalized-measure mass rho_t(1).
//
// When `normalized` is set, `weights` holds linear weights that sum to
// exactly 1.0 in floating point and all expectation code uses them directly.
struct ParticleEnsemble {
  Eigen::MatrixXd states;
  Eigen::VectorXd log_weights;
  double t = 0.0;
  double total_mass = 1.0;
  int slow_dim = 0;
  bool normalized = false;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(states.rows()); }
  int dim() const { return static_cast<int>(states.cols()); }
};

// exp(l - logsumexp(l)) with the residual folded into the largest weight so
// the left-to-right sum is exactly 1.0. This helper is the single source of
// normalized weights: normalize(), expectation() and the resampler all call
// it, which is what makes ratio identities hold bit-for-bit.
// Throws ZeroMass when every weight underflows to zero.
Eigen::VectorXd normalized_weights(const Eigen::VectorXd& log_weights);

// Sum over particles of exp(log_weights)/N as log: log of the mean relative
// weight. Used by the filters for mass bookkeeping.
double log_mean_weight(const Eigen::VectorXd& log_weights);

// Returns the ensemble carrying cached normalized weights; total_mass is
// preserved as metadata and log_weights are shifted by their log-sum.
ParticleEnsemble normalize(const ParticleEnsemble& ens);

// Effective sample size 1 / sum(w_i^2) of the normalized weights.
double ess(const ParticleEnsemble& ens);

// Posterior (normalized) expectation of phi over full particle rows. Because
// the mass factor cancels exactly, this is also rho(phi)/rho(1): the
// Kallianpur-Striebel ratio shares this code path.
double expectation(const ParticleEnsemble& ens,
                   const std::function<double(const Eigen::VectorXd&)>& phi);

// Unnormalized integral rho(phi) = total_mass * expectation(phi).
double integrate_unnormalized(const ParticleEnsemble& ens,
                              const std::function<double(const Eigen::VectorXd&)>& phi);

// Weighted mean / variance of the slow components.
Eigen::VectorXd slow_mean(const ParticleEnsemble& ens);
Eigen::VectorXd slow_variance(const ParticleEnsemble& ens);

// Drops the fast columns; weights, t and total_mass are copied bit-identical,
// so every weight functional of the marginal matches the full ensemble.
ParticleEnsemble slow_marginal(const ParticleEnsemble& ens);

// Systematic (low-variance) resampling with a single uniform offset.
// Post: uniform log-weights; total_mass unchanged (the mass estimate is
// carried across the resample as a scalar multiplier by the filters).
// The offset form lets callers share one offset across coupled ensembles:
// the remap is monotone in the cumulative weights, so nearby weight
// profiles resampled with the same offset keep nearby ancestor maps.
void systematic_resample(ParticleEnsemble& ens, double offset01);
void systematic_resample(ParticleEnsemble& ens, RngStream& rng);

}  // namespace msf
