#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msfilter/csv.hpp"
#include "msfilter/poisson.hpp"

namespace msf {

// Homogenized coefficients at one slow point x. All are mu_inf(x) averages:
//   bbar = <b>, abar = <sigma sigma^T>, hbar = <h>, sigbar = <sigma>,
//   btilde = <(du/dx) b_I>, atilde = <b_I (x) u + u (x) b_I>
// with u the cell-problem solution. Jensen makes abar - sigbar sigbar^T PSD.
struct AveragedCoeffs {
  Eigen::VectorXd bbar;    // m
  Eigen::VectorXd btilde;  // m
  Eigen::VectorXd hbar;    // d
  Eigen::MatrixXd abar;    // m x m
  Eigen::MatrixXd atilde;  // m x m, symmetric by construction
  Eigen::MatrixXd sigbar;  // m x w
};

struct NodeDiagnostics {
  Eigen::VectorXd bbar_se, btilde_se, hbar_se;
  Eigen::MatrixXd atilde_se;
  double min_eig_atilde = 0.0;  // pre-clip smallest eigenvalue
  double min_eig_excess = 0.0;  // pre-clip smallest eigenvalue of abar - sigbar sigbar^T
  double stationary_ess = 0.0;
  std::vector<std::string> warnings;
};

struct AveragingParams {
  StationaryParams stationary;
  PoissonParams poisson;
  int coeff_samples = 256;  // stationary draws at which u / du_dx are evaluated
  double psd_tol = 1e-8;    // PSDViolation threshold (relative to matrix scale)
};

// Monte Carlo estimate of the homogenized coefficients at x. Throws
// PSDViolation when atilde or abar - sigbar sigbar^T has an eigenvalue below
// -psd_tol * scale (MC error too large to trust); smaller violations are
// clipped by the factor routines.
AveragedCoeffs averaged_coefficients(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                     const AveragingParams& params, std::uint64_t seed,
                                     NodeDiagnostics* diag = nullptr);

// Tensor product grid over the slow space; one strictly increasing axis per
// slow dimension.
struct TensorGrid {
  std::vector<Eigen::VectorXd> axes;

  int dims() const { return static_cast<int>(axes.size()); }
  int points() const;
  Eigen::VectorXd node(int flat) const;  // row-major flat indexing
  static TensorGrid uniform(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            const Eigen::VectorXi& counts);
};

// Tabulated averaged model with precomputed diffusion factors per node:
// sqrt_atilde = atilde^{1/2}, sqrt_excess = (abar - sigbar sigbar^T)^{1/2}
// (symmetric PSD roots, negative eigenvalues clipped). Off-grid queries are
// clamped per dimension; interpolation is multilinear and exact at nodes.
struct AveragedModel {
  int m = 0, w = 0, d = 0;
  TensorGrid grid;
  std::vector<AveragedCoeffs> nodes;
  std::vector<Eigen::MatrixXd> sqrt_atilde;
  std::vector<Eigen::MatrixXd> sqrt_excess;
  std::vector<NodeDiagnostics> diagnostics;  // empty when loaded from JSON

  void coeffs_at(const Eigen::VectorXd& x, AveragedCoeffs& out, Eigen::MatrixXd& sqrt_atilde_out,
                 Eigen::MatrixXd& sqrt_excess_out) const;
  // True when x is within the grid's bounding box inflated by margin_rel of
  // each axis extent (GridEscape police for the averaged filter).
  bool inside(const Eigen::VectorXd& x, double margin_rel) const;
};

AveragedModel build_averaged_model(const MultiscaleModel& model, const TensorGrid& grid,
                                   const AveragingParams& params, std::uint64_t seed);

// Tabulates caller-supplied exact coefficients (registry analytic facts) on a
// grid; factor construction and PSD policing match the MC path.
using AnalyticAveraged = std::function<AveragedCoeffs(const Eigen::VectorXd& x)>;
AveragedModel tabulate_averaged_model(const AnalyticAveraged& fn, const TensorGrid& grid, int w,
                                      int d, double psd_tol = 1e-8);

// JSON round-trip, schema version "avgmodel-v1": axes, per-node coefficient
// matrices as row-major arrays, precomputed factors, provenance.
void save_averaged_model(const AveragedModel& avg, const std::string& path, const Provenance& prov);
AveragedModel load_averaged_model(const std::string& path);

// Hypothesis diagnostics (advisory; never throws on violation):
//   recurrence margin: min over probes of -<f(x,z), z>/|z|^alpha
//   ellipticity range: eigenvalue range of g g^T over probes
//   centering: mu_inf-average of b_I at a representative x.
struct AssumptionParams {
  double alpha = 2.0;
  int probes = 64;
  double radius = 6.0;    // |z| scale for recurrence probes
  double x_spread = 2.0;  // slow-probe standard deviation
  StationaryParams stationary;
};

struct AssumptionReport {
  double hf_alpha = 2.0;
  double hf_margin = 0.0;
  double hg_lambda_min = 0.0;
  double hg_lambda_max = 0.0;
  Eigen::VectorXd centering_mean, centering_se;
  bool hf_ok = false, hg_ok = false, centering_ok = false;
  std::vector<std::string> notes;
};

AssumptionReport check_assumptions(const MultiscaleModel& model, const AssumptionParams& params,
                                   std::uint64_t seed);

}  // namespace msf
