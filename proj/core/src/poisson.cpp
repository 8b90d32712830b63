#include "msfilter/poisson.hpp"

#include <cmath>

#include "msfilter/errors.hpp"
#include "msfilter/logging.hpp"

namespace msf {

namespace {

// Antithetic pair of frozen-fast paths sharing |dV| draws; accumulates the
// trapezoidal time integral of b_I(x, Z_s) along both and returns the pair
// average. Also reports b_I at the final time for the truncation check.
struct PairIntegrator {
  PairIntegrator(const MultiscaleModel& model, const Eigen::VectorXd& x, double dt, int steps)
      : model_(&model),
        x_(x),
        dt_(dt),
        sq_dt_(std::sqrt(dt)),
        steps_(steps),
        fv_(model.n),
        dv_(model.v),
        gv_(model.n, model.v),
        bi_(model.m) {}

  // integral out: m; final_mean out: m (average of b_I at t_max over the pair)
  void run(const Eigen::VectorXd& z0, RngStream rng, Eigen::VectorXd& integral,
           Eigen::VectorXd& final_mean) {
    Eigen::VectorXd zp = z0, zm = z0;
    integral.setZero();
    // trapezoid: endpoints get weight dt/2
    model_->b_I(x_, zp, bi_);
    integral += dt_ * bi_;  // both paths start at z0: 2 * (dt/2) * b_I(z0)
    for (int k = 0; k < steps_; ++k) {
      rng.fill_normal(dv_);
      dv_ *= sq_dt_;
      model_->f(x_, zp, fv_);
      model_->g(x_, zp, gv_);
      zp += fv_ * dt_;
      zp.noalias() += gv_ * dv_;
      model_->f(x_, zm, fv_);
      model_->g(x_, zm, gv_);
      zm += fv_ * dt_;
      zm.noalias() -= gv_ * dv_;
      const double wq = (k + 1 == steps_) ? 0.5 * dt_ : dt_;
      model_->b_I(x_, zp, bi_);
      integral += wq * bi_;
      if (k + 1 == steps_) final_mean = bi_;
      model_->b_I(x_, zm, bi_);
      integral += wq * bi_;
      if (k + 1 == steps_) final_mean = 0.5 * (final_mean + bi_);
    }
    if (!zp.allFinite() || !zm.allFinite()) {
      throw NumericalBlowup("cell-problem path diverged");
    }
    integral *= 0.5;  // pair average
  }

  const MultiscaleModel* model_;
  Eigen::VectorXd x_;
  double dt_, sq_dt_;
  int steps_;
  Eigen::VectorXd fv_, dv_;
  Eigen::MatrixXd gv_;
  Eigen::VectorXd bi_;
};

}  // namespace

CellProblemSolution::CellProblemSolution(const MultiscaleModel& model, Eigen::VectorXd x,
                                         PoissonParams params, std::uint64_t seed)
    : model_(&model), x_(std::move(x)), params_(params), seed_(seed) {
  t_max_ = params_.t_max;
  if (t_max_ <= 0.0) {
    const double mixing =
        estimate_mixing_time(model, x_, params_.stationary, mix64(seed ^ 0x715EC0FFEEULL));
    t_max_ = 20.0 * mixing;
    log_debug("poisson t_max auto-selected: " + std::to_string(t_max_));
  }
  steps_ = std::max(1, static_cast<int>(std::llround(t_max_ / params_.dt)));

  // Truncation check: from a displaced start the semigroup mean of b_I should
  // have decayed below tolerance by t_max.
  StationaryEstimate stat =
      estimate_stationary(model, x_, params_.stationary, mix64(seed ^ 0xDECA1ULL));
  Eigen::VectorXd probe = stat.mean();
  Eigen::VectorXd spread(model.n);
  for (int j = 0; j < model.n; ++j) {
    const Eigen::VectorXd col = stat.samples.col(j);
    const double mu = col.mean();
    spread[j] = std::sqrt((col.array() - mu).square().sum() /
                          std::max<double>(1.0, col.size() - 1));
  }
  probe += 2.0 * spread;

  PairIntegrator integ(model, x_, params_.dt, steps_);
  RngStream root = RngStream::root(seed_).child(stream_id::poisson);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.m);
  Eigen::VectorXd acc_sq = Eigen::VectorXd::Zero(model.m);
  Eigen::VectorXd integral(model.m), fin(model.m);
  for (int p = 0; p < params_.path_pairs; ++p) {
    integ.run(probe, root.child(p), integral, fin);
    acc += fin;
    acc_sq += fin.cwiseProduct(fin);
  }
  const double np = params_.path_pairs;
  const Eigen::VectorXd fin_mean = acc / np;
  Eigen::VectorXd fin_se = Eigen::VectorXd::Zero(model.m);
  if (params_.path_pairs > 1) {
    for (int j = 0; j < model.m; ++j) {
      const double var = std::max(0.0, (acc_sq[j] / np - fin_mean[j] * fin_mean[j]) * np / (np - 1));
      fin_se[j] = std::sqrt(var / np);
    }
  }
  for (int j = 0; j < model.m; ++j) {
    if (std::abs(fin_mean[j]) > params_.truncation_tol &&
        std::abs(fin_mean[j]) > 3.0 * fin_se[j]) {
      warnings_.push_back("TruncationWarning: T_{t_max} b_I component " + std::to_string(j) +
                          " is " + std::to_string(fin_mean[j]) + " at t_max=" +
                          std::to_string(t_max_));
      log_info(warnings_.back());
      break;
    }
  }
}

Eigen::VectorXd CellProblemSolution::raw_integral(const Eigen::VectorXd& x,
                                                  const Eigen::VectorXd& z) const {
  PairIntegrator integ(*model_, x, params_.dt, steps_);
  RngStream root = RngStream::root(seed_).child(stream_id::poisson);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(model_->m);
  Eigen::VectorXd integral(model_->m), fin(model_->m);
  for (int p = 0; p < params_.path_pairs; ++p) {
    integ.run(z, root.child(p), integral, fin);
    acc += integral;
  }
  return acc / static_cast<double>(params_.path_pairs);
}

const Eigen::VectorXd& CellProblemSolution::offset_for(const Eigen::VectorXd& x) const {
  for (const auto& entry : offset_cache_) {
    if (entry.first.size() == x.size() && entry.first == x) return entry.second;
  }
  // mu_inf-average of the raw integral: mean over stationary starts of the
  // pathwise integral (one antithetic pair per start, common noise).
  // b_I(x, start) is used as a control variate: the centering hypothesis
  // makes its mu_inf-mean exactly zero, and the raw integral is strongly
  // correlated with it, so the regression removes most of the start-sampling
  // noise without biasing the offset.
  StationaryEstimate stat =
      estimate_stationary(*model_, x, params_.stationary, mix64(seed_ ^ 0x0FF5E7ULL));
  PairIntegrator integ(*model_, x, params_.dt, steps_);
  RngStream root = RngStream::root(seed_).child(stream_id::poisson).child(0xA0FF5E7ULL);
  const int J = static_cast<int>(stat.samples.rows());
  Eigen::MatrixXd us(J, model_->m), cs(J, model_->m);
  Eigen::VectorXd integral(model_->m), fin(model_->m), biv(model_->m);
  for (int s = 0; s < J; ++s) {
    integ.run(stat.samples.row(s), root.child(s), integral, fin);
    us.row(s) = integral;
    model_->b_I(x, stat.samples.row(s), biv);
    cs.row(s) = biv;
  }
  Eigen::VectorXd offset(model_->m);
  for (int j = 0; j < model_->m; ++j) {
    const double ubar = us.col(j).mean();
    const double cbar = cs.col(j).mean();
    const double cvar = (cs.col(j).array() - cbar).square().sum();
    double beta = 0.0;
    if (cvar > 1e-12 * J) {
      beta = ((us.col(j).array() - ubar) * (cs.col(j).array() - cbar)).sum() / cvar;
    }
    offset[j] = ubar - beta * cbar;
  }
  offset_cache_.emplace_back(x, offset);
  return offset_cache_.back().second;
}

Eigen::VectorXd CellProblemSolution::evaluate(const Eigen::VectorXd& z) const {
  return raw_integral(x_, z) - offset_for(x_);
}

Eigen::MatrixXd CellProblemSolution::evaluate_dx(const Eigen::VectorXd& z) const {
  const int m = model_->m;
  Eigen::MatrixXd jac(m, m);
  Eigen::VectorXd xp = x_, xm = x_;
  for (int i = 0; i < m; ++i) {
    const double dx = params_.deriv_rel_step * (1.0 + std::abs(x_[i]));
    xp[i] = x_[i] + dx;
    xm[i] = x_[i] - dx;
    const Eigen::VectorXd up = raw_integral(xp, z) - offset_for(xp);
    const Eigen::VectorXd um = raw_integral(xm, z) - offset_for(xm);
    jac.col(i) = (up - um) / (2.0 * dx);
    xp[i] = x_[i];
    xm[i] = x_[i];
  }
  return jac;
}

CellProblemSolution solve_poisson(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                  const PoissonParams& params, std::uint64_t seed) {
  return CellProblemSolution(model, x, params, seed);
}

Eigen::VectorXd check_centering(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                const StationaryParams& params, std::uint64_t seed,
                                Eigen::VectorXd* se) {
  StationaryEstimate stat = estimate_stationary(model, x, params, seed);
  const int J = static_cast<int>(stat.samples.rows());
  Eigen::MatrixXd vals(J, model.m);
  Eigen::VectorXd biv(model.m);
  for (int s = 0; s < J; ++s) {
    model.b_I(x, stat.samples.row(s), biv);
    vals.row(s) = biv;
  }
  Eigen::VectorXd mean = vals.colwise().mean();
  if (se != nullptr) {
    se->resize(model.m);
    const double n_eff = std::max(1.0, stat.ess);
    for (int j = 0; j < model.m; ++j) {
      const double var = (vals.col(j).array() - mean[j]).square().sum() / std::max(1, J - 1);
      (*se)[j] = std::sqrt(var / n_eff);
    }
  }
  return mean;
}

Eigen::VectorXd fd_generator(const MultiscaleModel& model, const Eigen::VectorXd& x,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& u,
                             int u_dim, const Eigen::VectorXd& z, double dz) {
  const int n = model.n;
  Eigen::VectorXd fv(n);
  Eigen::MatrixXd gv(n, model.v);
  model.f(x, z, fv);
  model.g(x, z, gv);
  const Eigen::MatrixXd a = gv * gv.transpose();

  Eigen::VectorXd out = Eigen::VectorXd::Zero(u_dim);
  const Eigen::VectorXd u0 = u(z);
  Eigen::VectorXd zp = z, zm = z;
  // first-order and pure second-order terms
  for (int i = 0; i < n; ++i) {
    zp[i] = z[i] + dz;
    zm[i] = z[i] - dz;
    const Eigen::VectorXd up = u(zp);
    const Eigen::VectorXd um = u(zm);
    out += fv[i] * (up - um) / (2.0 * dz);
    out += 0.5 * a(i, i) * (up - 2.0 * u0 + um) / (dz * dz);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  // mixed second-order terms
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (a(i, j) == 0.0) continue;
      Eigen::VectorXd zpp = z, zpm = z, zmp = z, zmm = z;
      zpp[i] += dz; zpp[j] += dz;
      zpm[i] += dz; zpm[j] -= dz;
      zmp[i] -= dz; zmp[j] += dz;
      zmm[i] -= dz; zmm[j] -= dz;
      out += a(i, j) * (u(zpp) - u(zpm) - u(zmp) + u(zmm)) / (4.0 * dz * dz);
    }
  }
  return out;
}

}  // namespace msf
