#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "msfilter/csv.hpp"
#include "msfilter/ensemble.hpp"

namespace msf {

struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Time-indexed sequence of filtering measures. Particle kinds carry one
// ensemble per stored time; the kalman kind carries (mean, cov) pairs.
struct MeasurePath {
  enum class Kind { full, averaged, kalman };

  Kind kind = Kind::full;
  Eigen::VectorXd times;
  std::vector<ParticleEnsemble> ensembles;
  std::vector<GaussianState> gaussians;
  int slow_dim = 0;

  int size() const { return static_cast<int>(times.size()); }
};

// Per-time summary CSV: t,mass,mean_1..mean_m,var_1..var_m,ess (slow
// components; for the kalman kind mass=1 and ess is the state dimension
// placeholder 0). %.17g fields, provenance comment first.
void write_filter_csv(const MeasurePath& path, std::ostream& os, const Provenance& prov);

// Length-prefixed little-endian binary ensemble dump, record per stored time:
//   magic "pf-v1\0", then per record: u64 payload_bytes, f64 t, u64 N,
//   u64 dim, u64 slow_dim, f64 total_mass, N*dim f64 states (row-major),
//   N f64 log-weights.
void write_ensemble_dump(const MeasurePath& path, std::ostream& os);
MeasurePath read_ensemble_dump(std::istream& is);

}  // namespace msf
