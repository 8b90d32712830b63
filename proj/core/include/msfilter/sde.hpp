#pragma once

#include <cstdint>
#include <ostream>

#include <Eigen/Dense>

#include "msfilter/csv.hpp"
#include "msfilter/model.hpp"

namespace msf {

// Observation record consumed by the filters: cumulative path with Y(0) = 0
// on a uniform grid. Rows of Y are time points.
struct ObservationPath {
  Eigen::VectorXd times;  // K+1
  Eigen::MatrixXd Y;      // (K+1) x d
};

// One Euler-Maruyama realization of the slow/fast/observation triple.
// Row k of X/Z/Y is the state at times[k]; dW/dB hold per-step increments
// when requested (dB = alpha_w dW + gamma_w dU is the whitened observation
// noise increment).
struct PathBundle {
  Eigen::VectorXd times;
  Eigen::MatrixXd X;   // (K+1) x m
  Eigen::MatrixXd Z;   // (K+1) x n
  Eigen::MatrixXd Y;   // (K+1) x d
  Eigen::MatrixXd dW;  // K x w when stored, else 0 x 0
  Eigen::MatrixXd dB;  // K x d when stored, else 0 x 0
  std::uint64_t seed = 0;
  double eps = 0.0;

  ObservationPath observations() const { return ObservationPath{times, Y}; }
};

struct SimulateOptions {
  double dt = 0.0;           // 0 means use the cap dt_factor * eps^2
  double dt_factor = 0.1;    // cap: dt must not exceed dt_factor * eps^2
  bool store_increments = false;
  double blowup_norm = 1e8;  // NumericalBlowup guard on |X| and |Z|
};

// The step count is K = round(T / dt) and the actual step is T / K, so the
// path lands exactly on T. Throws StepTooCoarse when the actual step exceeds
// the eps^2 cap, NumericalBlowup when a state norm passes blowup_norm.
// Requires a whitened model.
PathBundle simulate_multiscale(const MultiscaleModel& model, double eps, double T,
                               std::uint64_t seed, const SimulateOptions& opts = {});

// Observation path under the reference measure: Y is a standard d-dim
// Brownian motion on the same kind of uniform grid (Y(0) = 0).
ObservationPath simulate_reference_observation(int d, double T, double dt, std::uint64_t seed);

// CSV schema: t,X1..Xm,Z1..Zn,Y1..Yd with %.17g fields, one row per grid
// time, provenance comment first.
void write_path_csv(const PathBundle& path, std::ostream& os, const Provenance& prov);

}  // namespace msf
