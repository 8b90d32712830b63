#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "msfilter/ensemble.hpp"
#include "msfilter/measure_path.hpp"

namespace msf {

// One bounded-Lipschitz test function R^dim -> R with sup-norm <= 1 and
// Lipschitz constant <= 1.
struct BLFunction {
  enum class Kind { gauss, ridge, constant };
  Kind kind = Kind::constant;
  Eigen::VectorXd center;  // gauss: bump center; ridge: unit direction
  double scale = 1.0;      // gauss: width lambda >= 0.65; ridge: steepness <= 1; constant: value
  double offset = 0.0;     // ridge: scalar shift of the projection

  double operator()(const Eigen::VectorXd& x) const;
};

// Seeded randomized dictionary realizing a computable surrogate of the
// bounded-Lipschitz metric. Gaussian bumps (amp 1, width in [0.65, 3] so the
// slope e^{-1/2}/lambda stays below 1), tanh ridges (steepness in [0.3, 1]),
// and constants including phi == 1, which exposes mass differences between
// unnormalized measures.
struct TestDictionary {
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<BLFunction> functions;

  static TestDictionary make(int dim, int size, std::uint64_t seed);

  // Max sup-norm and max finite-difference slope observed over a probe set;
  // both must stay <= 1 + tiny slack (tested, not assumed).
  void probe_bounds(const std::vector<Eigen::VectorXd>& probes, double* max_abs,
                    double* max_slope) const;
};

// max over the dictionary of |mu(phi) - nu(phi)| with mu, nu read as
// probability measures (normalized weights). Evaluates each phi on the
// leading dict.dim coordinates of the state, so a full ensemble scores
// identically to its slow marginal. Symmetric exactly: each side is summed
// separately and combined as |A - B|.
double bl_distance(const ParticleEnsemble& mu, const ParticleEnsemble& nu,
                   const TestDictionary& dict);

// Same value through the signed-measure route: the atoms of mu - nu are
// accumulated sign-split (positive part in mu's order, negative part in nu's
// order), so the result is bit-identical to bl_distance, never merely close.
double bl_distance_signed(const ParticleEnsemble& mu, const ParticleEnsemble& nu,
                          const TestDictionary& dict);

// 1 ^ max over shared grid times of bl_distance. The grids must match
// bitwise; both paths must store an ensemble at every time.
double path_distance(const MeasurePath& p, const MeasurePath& q, const TestDictionary& dict);

// sup over dictionary and grid times of |rho_p(phi) - rho_q(phi)| where
// rho(phi) = total_mass * E[phi] is the unnormalized integral. Uncapped.
double unnormalized_path_distance(const MeasurePath& p, const MeasurePath& q,
                                  const TestDictionary& dict);

}  // namespace msf
