#include "msfilter/sde.hpp"

#include <cmath>
#include <string>

#include "msfilter/errors.hpp"

namespace msf {

namespace {

int step_count(double T, double dt_requested) {
  if (!(T > 0.0) || !(dt_requested > 0.0)) {
    throw StepTooCoarse("simulation horizon and step must be positive");
  }
  // Round up so the realized dt never lands above the request; the relative
  // slack keeps exact divisions exact instead of bumping them one step up.
  const double ratio = T / dt_requested;
  return std::max(1, static_cast<int>(std::ceil(ratio * (1.0 - 1e-12))));
}

}  // namespace

PathBundle simulate_multiscale(const MultiscaleModel& model, double eps, double T,
                               std::uint64_t seed, const SimulateOptions& opts) {
  if (!model.whitened) {
    throw FactorizationFailure("simulate_multiscale requires a whitened model");
  }
  if (!(eps > 0.0)) {
    throw StepTooCoarse("eps must be positive");
  }
  const double cap = opts.dt_factor * eps * eps;
  const double requested = opts.dt > 0.0 ? opts.dt : cap;
  const int K = step_count(T, requested);
  const double dt = T / K;
  if (dt > cap * (1.0 + 1e-9)) {
    throw StepTooCoarse("dt " + std::to_string(dt) + " exceeds cap " + std::to_string(cap) +
                        " = dt_factor * eps^2");
  }
  const double sq_dt = std::sqrt(dt);

  PathBundle out;
  out.seed = seed;
  out.eps = eps;
  out.times.resize(K + 1);
  out.X.resize(K + 1, model.m);
  out.Z.resize(K + 1, model.n);
  out.Y.resize(K + 1, model.d);
  if (opts.store_increments) {
    out.dW.resize(K, model.w);
    out.dB.resize(K, model.d);
  }

  RngStream root = RngStream::root(seed);
  RngStream rng_w = root.child(stream_id::signal_w);
  RngStream rng_v = root.child(stream_id::fast_v);
  RngStream rng_u = root.child(stream_id::obs_u);
  RngStream rng_init = root.child(stream_id::init);

  Eigen::VectorXd x(model.m), z(model.n);
  model.init(rng_init, x, z);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(model.d);
  Eigen::VectorXd bv(model.m), biv(model.m), fv(model.n), hv(model.d);
  Eigen::MatrixXd sv(model.m, model.w), gv(model.n, model.v);
  Eigen::VectorXd dw(model.w), dv(model.v), du(model.u), db(model.d);

  out.times[0] = 0.0;
  out.X.row(0) = x;
  out.Z.row(0) = z;
  out.Y.row(0) = y;

  const double inv_eps = 1.0 / eps;
  const double inv_eps2 = inv_eps * inv_eps;

  for (int k = 0; k < K; ++k) {
    model.b(x, z, bv);
    model.b_I(x, z, biv);
    model.sigma(x, z, sv);
    model.f(x, z, fv);
    model.g(x, z, gv);
    model.h(x, z, hv);

    rng_w.fill_normal(dw);
    rng_v.fill_normal(dv);
    rng_u.fill_normal(du);
    dw *= sq_dt;
    dv *= sq_dt;
    du *= sq_dt;

    db.noalias() = model.alpha * dw;
    db.noalias() += model.gamma * du;

    x += (bv + inv_eps * biv) * dt;
    x.noalias() += sv * dw;
    z += inv_eps2 * fv * dt;
    z.noalias() += inv_eps * gv * dv;
    y += hv * dt + db;

    if (opts.store_increments) {
      out.dW.row(k) = dw;
      out.dB.row(k) = db;
    }

    if (!x.allFinite() || !z.allFinite() || x.norm() > opts.blowup_norm ||
        z.norm() > opts.blowup_norm) {
      throw NumericalBlowup("state norm exceeded " + std::to_string(opts.blowup_norm) +
                            " at t=" + std::to_string((k + 1) * dt));
    }

    out.times[k + 1] = (k + 1) * dt;
    out.X.row(k + 1) = x;
    out.Z.row(k + 1) = z;
    out.Y.row(k + 1) = y;
  }
  out.times[K] = T;
  return out;
}

ObservationPath simulate_reference_observation(int d, double T, double dt, std::uint64_t seed) {
  const int K = step_count(T, dt);
  const double step = T / K;
  const double sq_dt = std::sqrt(step);
  RngStream rng = RngStream::root(seed).child(stream_id::obs_u);
  ObservationPath out;
  out.times.resize(K + 1);
  out.Y.resize(K + 1, d);
  out.Y.row(0).setZero();
  out.times[0] = 0.0;
  Eigen::VectorXd db(d);
  for (int k = 0; k < K; ++k) {
    rng.fill_normal(db);
    out.Y.row(k + 1) = out.Y.row(k) + sq_dt * db.transpose();
    out.times[k + 1] = (k + 1) * step;
  }
  out.times[K] = T;
  return out;
}

void write_path_csv(const PathBundle& path, std::ostream& os, const Provenance& prov) {
  write_provenance_comment(os, prov);
  os << "t";
  for (int i = 0; i < path.X.cols(); ++i) os << ",X" << (i + 1);
  for (int i = 0; i < path.Z.cols(); ++i) os << ",Z" << (i + 1);
  for (int i = 0; i < path.Y.cols(); ++i) os << ",Y" << (i + 1);
  os << "\n";
  for (Eigen::Index k = 0; k < path.times.size(); ++k) {
    os << g17(path.times[k]);
    for (Eigen::Index i = 0; i < path.X.cols(); ++i) os << "," << g17(path.X(k, i));
    for (Eigen::Index i = 0; i < path.Z.cols(); ++i) os << "," << g17(path.Z(k, i));
    for (Eigen::Index i = 0; i < path.Y.cols(); ++i) os << "," << g17(path.Y(k, i));
    os << "\n";
  }
}

}  // namespace msf
