#include "msfilter/particle_filter.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "msfilter/errors.hpp"
#include "msfilter/logging.hpp"

namespace msf {

namespace {

struct GridCheck {
  int K = 0;
  double dt = 0.0;
};

GridCheck validate_grid(const ObservationPath& obs) {
  const int K = static_cast<int>(obs.times.size()) - 1;
  if (K < 1) throw GridMismatch("observation path needs at least two grid points");
  GridCheck g;
  g.K = K;
  g.dt = obs.times[1] - obs.times[0];
  return g;
}

// Shared per-step bookkeeping: mass update, weight-collapse police,
// ESS-triggered systematic resampling. Split so a coupled pair of filters
// can synchronize the trigger and the offset while each side keeps its own
// mass and collapse state.
struct WeightManager {
  WeightManager(int n, const FilterOptions& opts, RngStream resample_rng)
      : opts_(opts), rng_(resample_rng), n_(n) {}

  // Mass update + collapse policing; returns the ESS for the trigger test.
  double pre(ParticleEnsemble& ens, double log_mass_offset, double t) {
    last_lmw_ = log_mean_weight(ens.log_weights);
    ens.total_mass = std::exp(log_mass_offset + last_lmw_);
    const Eigen::VectorXd w = normalized_weights(ens.log_weights);
    const double wmax = w.maxCoeff();
    if (wmax > 1.0 - opts_.collapse_tol) {
      if (++collapse_run_ > opts_.collapse_patience) {
        throw WeightCollapse("normalized weight mass collapsed onto one particle near t=" +
                             std::to_string(t));
      }
    } else {
      collapse_run_ = 0;
    }
    return 1.0 / w.squaredNorm();
  }

  bool want(double ess) const {
    return opts_.resample.enabled && ess < opts_.resample.ess_fraction * n_;
  }

  // Folds the mean weight into the mass offset, then remaps with the offset.
  void resample(ParticleEnsemble& ens, double& log_mass_offset, double offset01, double t,
                double ess) {
    log_mass_offset = log_mass_offset + last_lmw_;
    systematic_resample(ens, offset01);
    log_debug("resampled at t=" + std::to_string(t) + " (ess=" + std::to_string(ess) + ")");
  }

  void step(ParticleEnsemble& ens, double& log_mass_offset, double t) {
    const double e = pre(ens, log_mass_offset, t);
    if (want(e)) resample(ens, log_mass_offset, 1.0 - rng_.uniform(), t, e);
  }

  const FilterOptions& opts_;
  RngStream rng_;
  int n_;
  int collapse_run_ = 0;
  double last_lmw_ = 0.0;
};

}  // namespace

MeasurePath particle_filter_full(const MultiscaleModel& model, double eps,
                                 const ObservationPath& obs, int n_particles, std::uint64_t seed,
                                 const FilterOptions& opts) {
  if (!model.whitened) throw FactorizationFailure("particle_filter_full requires a whitened model");
  const GridCheck grid = validate_grid(obs);
  const int m = model.m, n = model.n, w = model.w, v = model.v;
  const NoiseDecomposition nd = decompose_noise(model.correlation);
  const Eigen::MatrixXd& projT = nd.proj;  // w x d
  const Eigen::MatrixXd& C = nd.C;         // w x w

  MeasurePath out;
  out.kind = MeasurePath::Kind::full;
  out.slow_dim = m;

  RngStream root = RngStream::root(seed);
  RngStream part_root = root.child(stream_id::particle);
  WeightManager wm(n_particles, opts, root.child(stream_id::resample));

  ParticleEnsemble ens;
  ens.states.resize(n_particles, m + n);
  ens.log_weights = Eigen::VectorXd::Zero(n_particles);
  ens.slow_dim = m;
  ens.total_mass = 1.0;

  std::vector<RngStream> prng;
  prng.reserve(n_particles);
  Eigen::VectorXd x0(m), z0(n);
  for (int i = 0; i < n_particles; ++i) {
    prng.push_back(part_root.child(static_cast<std::uint64_t>(i)));
    model.init(prng.back(), x0, z0);
    ens.states.row(i).head(m) = x0;
    ens.states.row(i).tail(n) = z0;
  }

  std::vector<double> stored_times;
  auto snapshot = [&](double t) {
    ens.t = t;
    out.ensembles.push_back(ens);
    stored_times.push_back(t);
  };
  snapshot(obs.times[0]);

  const double inv_eps = 1.0 / eps;
  const double inv_eps2 = inv_eps * inv_eps;
  Eigen::VectorXd x(m), z(n), bv(m), biv(m), fv(n), hv(model.d);
  Eigen::MatrixXd sv(m, w), gv(n, v);
  Eigen::VectorXd dy(model.d), dn(w), dv(v), wvec(w);
  double log_mass_offset = 0.0;

  for (int k = 0; k < grid.K; ++k) {
    const double dt = obs.times[k + 1] - obs.times[k];
    const double sq_dt = std::sqrt(dt);
    dy = obs.Y.row(k + 1) - obs.Y.row(k);
    for (int i = 0; i < n_particles; ++i) {
      x = ens.states.row(i).head(m);
      z = ens.states.row(i).tail(n);
      model.b(x, z, bv);
      model.b_I(x, z, biv);
      model.sigma(x, z, sv);
      model.f(x, z, fv);
      model.g(x, z, gv);
      model.h(x, z, hv);

      ens.log_weights[i] += hv.dot(dy) - 0.5 * hv.squaredNorm() * dt;

      RngStream& rng = prng[static_cast<std::size_t>(i)];
      rng.fill_normal(dn);
      rng.fill_normal(dv);
      // conditional slow noise: alpha_w^T (dY - h dt) + C dN_i
      wvec.noalias() = projT * (dy - hv * dt);
      wvec.noalias() += C * (sq_dt * dn);
      x += (bv + inv_eps * biv) * dt;
      x.noalias() += sv * wvec;
      z += inv_eps2 * fv * dt;
      z.noalias() += gv * (inv_eps * sq_dt * dv);

      if (!x.allFinite() || !z.allFinite() || x.norm() > opts.blowup_norm ||
          z.norm() > opts.blowup_norm) {
        throw NumericalBlowup("particle diverged at t=" + std::to_string(obs.times[k + 1]));
      }
      ens.states.row(i).head(m) = x;
      ens.states.row(i).tail(n) = z;
    }
    wm.step(ens, log_mass_offset, obs.times[k + 1]);
    if ((k + 1) % opts.store_every == 0 || k + 1 == grid.K) snapshot(obs.times[k + 1]);
  }

  out.times = Eigen::Map<Eigen::VectorXd>(stored_times.data(),
                                          static_cast<Eigen::Index>(stored_times.size()));
  return out;
}

MeasurePath particle_filter_averaged(const AveragedModel& avg, const MultiscaleModel& model,
                                     const ObservationPath& obs, int n_particles,
                                     std::uint64_t seed, const FilterOptions& opts) {
  if (!model.whitened) {
    throw FactorizationFailure("particle_filter_averaged requires a whitened model");
  }
  const GridCheck grid = validate_grid(obs);
  const int m = avg.m, w = avg.w;
  const NoiseDecomposition nd = decompose_noise(model.correlation);
  const Eigen::MatrixXd& projT = nd.proj;
  const Eigen::MatrixXd& C = nd.C;

  MeasurePath out;
  out.kind = MeasurePath::Kind::averaged;
  out.slow_dim = m;

  RngStream root = RngStream::root(seed);
  RngStream part_root = root.child(stream_id::particle);
  WeightManager wm(n_particles, opts, root.child(stream_id::resample));

  ParticleEnsemble ens;
  ens.states.resize(n_particles, m);
  ens.log_weights = Eigen::VectorXd::Zero(n_particles);
  ens.slow_dim = m;
  ens.total_mass = 1.0;

  std::vector<RngStream> prng;
  prng.reserve(n_particles);
  Eigen::VectorXd x0(m), z0(model.n);
  for (int i = 0; i < n_particles; ++i) {
    prng.push_back(part_root.child(static_cast<std::uint64_t>(i)));
    model.init(prng.back(), x0, z0);  // averaged filter keeps the slow marginal of the init law
    ens.states.row(i) = x0;
  }

  std::vector<double> stored_times;
  auto snapshot = [&](double t) {
    ens.t = t;
    out.ensembles.push_back(ens);
    stored_times.push_back(t);
  };
  snapshot(obs.times[0]);

  AveragedCoeffs cf;
  Eigen::MatrixXd sqa(m, m), sqe(m, m);
  Eigen::VectorXd x(m), dy(avg.d), dn(w), dwt(m), dwh(m), wvec(w);
  double log_mass_offset = 0.0;

  for (int k = 0; k < grid.K; ++k) {
    const double dt = obs.times[k + 1] - obs.times[k];
    const double sq_dt = std::sqrt(dt);
    dy = obs.Y.row(k + 1) - obs.Y.row(k);
    for (int i = 0; i < n_particles; ++i) {
      x = ens.states.row(i);
      avg.coeffs_at(x, cf, sqa, sqe);

      ens.log_weights[i] += cf.hbar.dot(dy) - 0.5 * cf.hbar.squaredNorm() * dt;

      RngStream& rng = prng[static_cast<std::size_t>(i)];
      rng.fill_normal(dn);
      rng.fill_normal(dwt);
      rng.fill_normal(dwh);
      wvec.noalias() = projT * (dy - cf.hbar * dt);
      wvec.noalias() += C * (sq_dt * dn);
      x += (cf.bbar + cf.btilde) * dt;
      x.noalias() += sqa * (sq_dt * dwt);
      x.noalias() += sqe * (sq_dt * dwh);
      x.noalias() += cf.sigbar * wvec;

      if (!x.allFinite() || x.norm() > opts.blowup_norm) {
        throw NumericalBlowup("averaged particle diverged at t=" +
                              std::to_string(obs.times[k + 1]));
      }
      if (!avg.inside(x, opts.grid_escape_margin)) {
        throw GridEscape("particle left the averaged grid support at t=" +
                         std::to_string(obs.times[k + 1]));
      }
      ens.states.row(i) = x;
    }
    wm.step(ens, log_mass_offset, obs.times[k + 1]);
    if ((k + 1) % opts.store_every == 0 || k + 1 == grid.K) snapshot(obs.times[k + 1]);
  }

  out.times = Eigen::Map<Eigen::VectorXd>(stored_times.data(),
                                          static_cast<Eigen::Index>(stored_times.size()));
  return out;
}

CoupledFilterResult particle_filter_coupled(const MultiscaleModel& model, double eps,
                                            const AveragedModel& avg, const ObservationPath& obs,
                                            int n_particles, std::uint64_t seed,
                                            const FilterOptions& opts) {
  if (!model.whitened) {
    throw FactorizationFailure("particle_filter_coupled requires a whitened model");
  }
  if (avg.m != model.m) throw GridMismatch("averaged model slow dimension mismatch");
  const GridCheck grid = validate_grid(obs);
  const int m = model.m, n = model.n, w = model.w, v = model.v;
  const NoiseDecomposition nd = decompose_noise(model.correlation);
  const Eigen::MatrixXd& projT = nd.proj;
  const Eigen::MatrixXd& C = nd.C;

  CoupledFilterResult res;
  res.full.kind = MeasurePath::Kind::full;
  res.full.slow_dim = m;
  res.averaged.kind = MeasurePath::Kind::averaged;
  res.averaged.slow_dim = m;

  RngStream root = RngStream::root(seed);
  RngStream part_root = root.child(stream_id::particle);
  RngStream res_root = root.child(stream_id::resample);
  WeightManager wmF(n_particles, opts, res_root);
  WeightManager wmA(n_particles, opts, res_root);

  ParticleEnsemble ensF, ensA;
  ensF.states.resize(n_particles, m + n);
  ensF.log_weights = Eigen::VectorXd::Zero(n_particles);
  ensF.slow_dim = m;
  ensA.states.resize(n_particles, m);
  ensA.log_weights = Eigen::VectorXd::Zero(n_particles);
  ensA.slow_dim = m;

  // One init draw per particle feeds both sides: identical slow starts.
  Eigen::VectorXd x0(m), z0(n);
  for (int i = 0; i < n_particles; ++i) {
    RngStream init_rng = part_root.child(static_cast<std::uint64_t>(i));
    model.init(init_rng, x0, z0);
    ensF.states.row(i).head(m) = x0;
    ensF.states.row(i).tail(n) = z0;
    ensA.states.row(i) = x0;
  }

  std::vector<double> stored_times;
  auto snapshot = [&](double t) {
    ensF.t = t;
    ensA.t = t;
    res.full.ensembles.push_back(ensF);
    res.averaged.ensembles.push_back(ensA);
    stored_times.push_back(t);
  };
  snapshot(obs.times[0]);

  const double inv_eps = 1.0 / eps;
  const double inv_eps2 = inv_eps * inv_eps;
  const int shared = std::min(m, v);
  Eigen::VectorXd x(m), z(n), bv(m), biv(m), fv(n), hv(model.d);
  Eigen::MatrixXd sv(m, w), gv(n, v);
  AveragedCoeffs cf;
  Eigen::MatrixXd sqa(m, m), sqe(m, m);
  Eigen::VectorXd dy(model.d), dn(w), dv(v), dwt(m), dwh(m), wvec(w), avec(w), xa(m);
  double lmoF = 0.0, lmoA = 0.0;

  for (int k = 0; k < grid.K; ++k) {
    const double dt = obs.times[k + 1] - obs.times[k];
    const double sq_dt = std::sqrt(dt);
    dy = obs.Y.row(k + 1) - obs.Y.row(k);
    for (int i = 0; i < n_particles; ++i) {
      // Draws come from a per-particle per-step substream with a fixed
      // channel order, so the shared channels align bitwise between the two
      // sides no matter how much state either side carries.
      RngStream srng = part_root.child(static_cast<std::uint64_t>(i))
                           .child(static_cast<std::uint64_t>(k) + 1);
      srng.fill_normal(dn);
      srng.fill_normal(dv);
      dwt.head(shared) = dv.head(shared);
      for (int j = shared; j < m; ++j) dwt[j] = srng.normal();
      srng.fill_normal(dwh);

      x = ensF.states.row(i).head(m);
      z = ensF.states.row(i).tail(n);
      model.b(x, z, bv);
      model.b_I(x, z, biv);
      model.sigma(x, z, sv);
      model.f(x, z, fv);
      model.g(x, z, gv);
      model.h(x, z, hv);
      ensF.log_weights[i] += hv.dot(dy) - 0.5 * hv.squaredNorm() * dt;
      wvec.noalias() = projT * (dy - hv * dt);
      wvec.noalias() += C * (sq_dt * dn);
      x += (bv + inv_eps * biv) * dt;
      x.noalias() += sv * wvec;
      z += inv_eps2 * fv * dt;
      z.noalias() += gv * (inv_eps * sq_dt * dv);
      if (!x.allFinite() || !z.allFinite() || x.norm() > opts.blowup_norm ||
          z.norm() > opts.blowup_norm) {
        throw NumericalBlowup("particle diverged at t=" + std::to_string(obs.times[k + 1]));
      }
      ensF.states.row(i).head(m) = x;
      ensF.states.row(i).tail(n) = z;

      xa = ensA.states.row(i);
      avg.coeffs_at(xa, cf, sqa, sqe);
      ensA.log_weights[i] += cf.hbar.dot(dy) - 0.5 * cf.hbar.squaredNorm() * dt;
      avec.noalias() = projT * (dy - cf.hbar * dt);
      avec.noalias() += C * (sq_dt * dn);
      xa += (cf.bbar + cf.btilde) * dt;
      xa.noalias() += sqa * (sq_dt * dwt);
      xa.noalias() += sqe * (sq_dt * dwh);
      xa.noalias() += cf.sigbar * avec;
      if (!xa.allFinite() || xa.norm() > opts.blowup_norm) {
        throw NumericalBlowup("averaged particle diverged at t=" +
                              std::to_string(obs.times[k + 1]));
      }
      if (!avg.inside(xa, opts.grid_escape_margin)) {
        throw GridEscape("particle left the averaged grid support at t=" +
                         std::to_string(obs.times[k + 1]));
      }
      ensA.states.row(i) = xa;
    }
    const double t_next = obs.times[k + 1];
    const double essF = wmF.pre(ensF, lmoF, t_next);
    const double essA = wmA.pre(ensA, lmoA, t_next);
    if (wmF.want(essF) || wmA.want(essA)) {
      RngStream srs = res_root.child(static_cast<std::uint64_t>(k) + 1);
      const double offset = 1.0 - srs.uniform();
      wmF.resample(ensF, lmoF, offset, t_next, essF);
      wmA.resample(ensA, lmoA, offset, t_next, essA);
    }
    if ((k + 1) % opts.store_every == 0 || k + 1 == grid.K) snapshot(t_next);
  }

  const Eigen::Map<Eigen::VectorXd> times(stored_times.data(),
                                          static_cast<Eigen::Index>(stored_times.size()));
  res.full.times = times;
  res.averaged.times = times;
  return res;
}

}  // namespace msf
