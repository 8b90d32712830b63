#include "msfilter/stationary.hpp"

#include <cmath>
#include <string>

#include "msfilter/errors.hpp"
#include "msfilter/logging.hpp"

namespace msf {

FrozenFastStepper::FrozenFastStepper(const MultiscaleModel& m, Eigen::VectorXd x_, double dt_)
    : model(&m), x(std::move(x_)), dt(dt_), sq_dt(std::sqrt(dt_)), fv(m.n), dv(m.v), gv(m.n, m.v) {}

void FrozenFastStepper::step(Eigen::VectorXd& z, RngStream& rng) {
  model->f(x, z, fv);
  model->g(x, z, gv);
  rng.fill_normal(dv);
  z += fv * dt;
  z.noalias() += gv * (sq_dt * dv);
}

namespace {

// Integrated-autocorrelation ESS of one scalar chain: n / (1 + 2 sum acf_k),
// summing while the autocorrelation stays above a small positive floor.
double chain_ess(const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  if (n < 4) return static_cast<double>(n);
  const double mu = c.mean();
  const Eigen::VectorXd d = c.array() - mu;
  const double var = d.squaredNorm() / static_cast<double>(n);
  if (var <= 0.0) return static_cast<double>(n);
  double tau = 1.0;
  for (Eigen::Index lag = 1; lag < n / 4; ++lag) {
    double acov = 0.0;
    for (Eigen::Index i = 0; i + lag < n; ++i) acov += d[i] * d[i + lag];
    const double rho = acov / (static_cast<double>(n - lag) * var);
    if (rho < 0.05) break;
    tau += 2.0 * rho;
  }
  return static_cast<double>(n) / tau;
}

void init_fast_state(const MultiscaleModel& model, RngStream& rng, Eigen::VectorXd& z) {
  Eigen::VectorXd x0(model.m);
  model.init(rng, x0, z);
}

}  // namespace

StationaryEstimate estimate_stationary(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                       const StationaryParams& params, std::uint64_t seed) {
  StationaryEstimate out;
  out.burn_in = std::max(1, static_cast<int>(std::llround(params.burn_in_time / params.dt)));
  out.thinning = std::max(1, static_cast<int>(std::llround(params.thin_time / params.dt)));
  out.samples.resize(params.n_samples, model.n);

  RngStream root = RngStream::root(seed).child(stream_id::stationary);
  RngStream rng_init = root.child(0);
  RngStream rng_path = root.child(1);

  Eigen::VectorXd z(model.n);
  init_fast_state(model, rng_init, z);

  FrozenFastStepper stepper(model, x, params.dt);
  for (int k = 0; k < out.burn_in; ++k) stepper.step(z, rng_path);
  for (int s = 0; s < params.n_samples; ++s) {
    for (int k = 0; k < out.thinning; ++k) stepper.step(z, rng_path);
    if (!z.allFinite() || z.norm() > params.blowup_norm) {
      throw NumericalBlowup("frozen-fast trajectory diverged while sampling mu_inf");
    }
    out.samples.row(s) = z;
  }

  out.ess = static_cast<double>(params.n_samples);
  for (int j = 0; j < model.n; ++j) {
    out.ess = std::min(out.ess, chain_ess(out.samples.col(j)));
  }
  if (out.ess < params.ess_floor) {
    out.warnings.push_back("ErgodicityWarning: stationary ESS " + std::to_string(out.ess) +
                           " below floor " + std::to_string(params.ess_floor));
    log_info(out.warnings.back());
  }
  return out;
}

double estimate_mixing_time(const MultiscaleModel& model, const Eigen::VectorXd& x,
                            const StationaryParams& params, std::uint64_t seed) {
  RngStream root = RngStream::root(seed).child(stream_id::stationary).child(2);
  RngStream rng_init = root.child(0);
  RngStream rng_path = root.child(1);

  Eigen::VectorXd z(model.n);
  init_fast_state(model, rng_init, z);

  FrozenFastStepper stepper(model, x, params.dt);
  const int burn = std::max(1, static_cast<int>(std::llround(params.burn_in_time / params.dt)));
  for (int k = 0; k < burn; ++k) stepper.step(z, rng_path);

  // Unthinned record of b_I(x, Z_t) over a window long enough to resolve the
  // first 1/e crossing of the autocorrelation.
  const int len = std::max(2000, 8 * burn);
  Eigen::MatrixXd series(len, model.m);
  Eigen::VectorXd biv(model.m);
  for (int k = 0; k < len; ++k) {
    stepper.step(z, rng_path);
    model.b_I(x, z, biv);
    series.row(k) = biv;
  }

  double mixing = 0.0;
  for (int j = 0; j < model.m; ++j) {
    const Eigen::VectorXd c = series.col(j);
    const double mu = c.mean();
    const Eigen::VectorXd d = c.array() - mu;
    const double var = d.squaredNorm() / static_cast<double>(len);
    if (var <= 1e-14) continue;  // component carries no signal
    const double target = std::exp(-1.0);
    for (int lag = 1; lag < len / 2; ++lag) {
      double acov = 0.0;
      for (int i = 0; i + lag < len; ++i) acov += d[i] * d[i + lag];
      const double rho = acov / (static_cast<double>(len - lag) * var);
      if (rho < target) {
        mixing = std::max(mixing, lag * params.dt);
        break;
      }
    }
  }
  if (mixing <= 0.0) mixing = 1.0;  // b_I vanishes: any O(1) scale works
  return mixing;
}

SemigroupEstimate semigroup_mc(const MultiscaleModel& model, const Eigen::VectorXd& x,
                               const ZFn& phi, int phi_dim, double t, const Eigen::VectorXd& z0,
                               int n_paths, double dt, std::uint64_t seed) {
  SemigroupEstimate out;
  out.n_paths = n_paths;
  out.value.resize(phi_dim);
  out.se = Eigen::VectorXd::Zero(phi_dim);
  if (t <= 0.0) {
    phi(z0, out.value);  // T_0 phi = phi, exactly
    return out;
  }

  const int steps = std::max(1, static_cast<int>(std::llround(t / dt)));
  const double step_dt = t / steps;
  RngStream root = RngStream::root(seed).child(stream_id::semigroup);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(phi_dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(phi_dim);
  Eigen::VectorXd z(model.n), val(phi_dim);
  FrozenFastStepper stepper(model, x, step_dt);
  for (int p = 0; p < n_paths; ++p) {
    RngStream rng = root.child(static_cast<std::uint64_t>(p));
    z = z0;
    for (int k = 0; k < steps; ++k) stepper.step(z, rng);
    if (!z.allFinite()) throw NumericalBlowup("semigroup path diverged");
    phi(z, val);
    sum += val;
    sum_sq += val.cwiseProduct(val);
  }
  out.value = sum / static_cast<double>(n_paths);
  if (n_paths > 1) {
    for (int j = 0; j < phi_dim; ++j) {
      const double var =
          std::max(0.0, (sum_sq[j] / n_paths - out.value[j] * out.value[j]) *
                            (static_cast<double>(n_paths) / (n_paths - 1)));
      out.se[j] = std::sqrt(var / n_paths);
    }
  }
  return out;
}

}  // namespace msf
