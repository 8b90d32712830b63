#include "msfilter/averaging.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "msfilter/errors.hpp"
#include "msfilter/linalg.hpp"
#include "msfilter/logging.hpp"

namespace msf {

namespace {

Eigen::VectorXd column_se(const Eigen::MatrixXd& vals, const Eigen::VectorXd& mean, double n_eff) {
  Eigen::VectorXd se(vals.cols());
  const double denom = std::max<double>(1.0, vals.rows() - 1);
  for (Eigen::Index j = 0; j < vals.cols(); ++j) {
    const double var = (vals.col(j).array() - mean[j]).square().sum() / denom;
    se[j] = std::sqrt(var / std::max(1.0, n_eff));
  }
  return se;
}

}  // namespace

AveragedCoeffs averaged_coefficients(const MultiscaleModel& model, const Eigen::VectorXd& x,
                                     const AveragingParams& params, std::uint64_t seed,
                                     NodeDiagnostics* diag) {
  const int m = model.m, w = model.w, d = model.d;
  StationaryEstimate stat =
      estimate_stationary(model, x, params.stationary, mix64(seed ^ 0x57A7ULL));
  const int J = static_cast<int>(stat.samples.rows());

  AveragedCoeffs out;
  out.bbar = Eigen::VectorXd::Zero(m);
  out.btilde = Eigen::VectorXd::Zero(m);
  out.hbar = Eigen::VectorXd::Zero(d);
  out.abar = Eigen::MatrixXd::Zero(m, m);
  out.atilde = Eigen::MatrixXd::Zero(m, m);
  out.sigbar = Eigen::MatrixXd::Zero(m, w);

  Eigen::MatrixXd b_vals(J, m), h_vals(J, d);
  Eigen::VectorXd bv(m), hv(d), z(model.n);
  Eigen::MatrixXd sv(m, w);
  for (int s = 0; s < J; ++s) {
    z = stat.samples.row(s);
    model.b(x, z, bv);
    model.h(x, z, hv);
    model.sigma(x, z, sv);
    b_vals.row(s) = bv;
    h_vals.row(s) = hv;
    out.abar += sv * sv.transpose();
    out.sigbar += sv;
  }
  out.bbar = b_vals.colwise().mean();
  out.hbar = h_vals.colwise().mean();
  out.abar /= static_cast<double>(J);
  out.sigbar /= static_cast<double>(J);

  // Corrector terms: evaluate u and du/dx at a stationary subsample.
  const int Jc = std::min(J, std::max(1, params.coeff_samples));
  CellProblemSolution cell =
      solve_poisson(model, x, params.poisson, mix64(seed ^ 0xCE11ULL));
  Eigen::MatrixXd bt_vals(Jc, m);
  std::vector<Eigen::MatrixXd> at_vals(static_cast<std::size_t>(Jc));
  Eigen::VectorXd biv(m);
  for (int s = 0; s < Jc; ++s) {
    z = stat.samples.row(s);
    model.b_I(x, z, biv);
    const Eigen::VectorXd u = cell.evaluate(z);
    const Eigen::MatrixXd du = cell.evaluate_dx(z);
    bt_vals.row(s) = du * biv;
    at_vals[s] = biv * u.transpose() + u * biv.transpose();
    out.atilde += at_vals[s];
  }
  out.btilde = bt_vals.colwise().mean();
  out.atilde /= static_cast<double>(Jc);

  // PSD policing (raw eigenvalues recorded before any clipping downstream).
  const double min_at = min_symmetric_eigenvalue(out.atilde);
  const Eigen::MatrixXd excess = out.abar - out.sigbar * out.sigbar.transpose();
  const double min_ex = min_symmetric_eigenvalue(excess);
  const double at_scale = std::max(1.0, out.atilde.norm());
  const double ex_scale = std::max(1.0, out.abar.norm());
  if (min_at < -params.psd_tol * at_scale) {
    throw PSDViolation("atilde eigenvalue " + std::to_string(min_at) +
                       " below tolerance: Monte Carlo error too large");
  }
  if (min_ex < -params.psd_tol * ex_scale) {
    throw PSDViolation("abar - sigbar sigbar^T eigenvalue " + std::to_string(min_ex) +
                       " below tolerance: Monte Carlo error too large");
  }

  if (diag != nullptr) {
    const double n_eff_full = std::max(1.0, stat.ess);
    const double n_eff_sub = std::max(1.0, stat.ess * Jc / J);
    diag->bbar_se = column_se(b_vals, out.bbar, n_eff_full);
    diag->hbar_se = column_se(h_vals, out.hbar, n_eff_full);
    diag->btilde_se = column_se(bt_vals, out.btilde, n_eff_sub);
    diag->atilde_se.resize(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double var = 0.0;
        for (int s = 0; s < Jc; ++s) {
          const double dev = at_vals[s](i, j) - out.atilde(i, j);
          var += dev * dev;
        }
        var /= std::max(1, Jc - 1);
        diag->atilde_se(i, j) = std::sqrt(var / n_eff_sub);
      }
    }
    diag->min_eig_atilde = min_at;
    diag->min_eig_excess = min_ex;
    diag->stationary_ess = stat.ess;
    diag->warnings = stat.warnings;
    for (const auto& s : cell.warnings()) diag->warnings.push_back(s);
  }
  return out;
}

int TensorGrid::points() const {
  int p = 1;
  for (const auto& ax : axes) p *= static_cast<int>(ax.size());
  return p;
}

Eigen::VectorXd TensorGrid::node(int flat) const {
  const int md = dims();
  Eigen::VectorXd x(md);
  // row-major: the last axis varies fastest
  for (int i = md - 1; i >= 0; --i) {
    const int len = static_cast<int>(axes[i].size());
    x[i] = axes[i][flat % len];
    flat /= len;
  }
  return x;
}

TensorGrid TensorGrid::uniform(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const Eigen::VectorXi& counts) {
  TensorGrid g;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const int c = counts[i];
    if (c < 2 || !(hi[i] > lo[i])) throw ConfigError("grid axis needs hi > lo and >= 2 points");
    Eigen::VectorXd ax(c);
    for (int k = 0; k < c; ++k) ax[k] = lo[i] + (hi[i] - lo[i]) * k / (c - 1);
    ax[c - 1] = hi[i];
    g.axes.push_back(ax);
  }
  return g;
}

namespace {

// Locates the cell and barycentric weight along one axis, clamping outside.
void locate(const Eigen::VectorXd& ax, double x, int& lo, double& t) {
  const int n = static_cast<int>(ax.size());
  if (x <= ax[0]) { lo = 0; t = 0.0; return; }
  if (x >= ax[n - 1]) { lo = n - 2; t = 1.0; return; }
  int a = 0, b = n - 1;
  while (b - a > 1) {
    const int mid = (a + b) / 2;
    if (ax[mid] <= x) a = mid; else b = mid;
  }
  lo = a;
  t = (x - ax[a]) / (ax[a + 1] - ax[a]);
}

}  // namespace

void AveragedModel::coeffs_at(const Eigen::VectorXd& x, AveragedCoeffs& out,
                              Eigen::MatrixXd& sqrt_atilde_out,
                              Eigen::MatrixXd& sqrt_excess_out) const {
  const int md = grid.dims();
  int lo[8];
  double tt[8];
  if (md > 8) throw GridMismatch("tensor grid supports at most 8 slow dimensions");
  for (int i = 0; i < md; ++i) locate(grid.axes[i], x[i], lo[i], tt[i]);

  out.bbar.setZero(m);
  out.btilde.setZero(m);
  out.hbar.setZero(d);
  out.abar.setZero(m, m);
  out.atilde.setZero(m, m);
  out.sigbar.setZero(m, w);
  sqrt_atilde_out.setZero(m, m);
  sqrt_excess_out.setZero(m, m);

  const int corners = 1 << md;
  for (int c = 0; c < corners; ++c) {
    double wgt = 1.0;
    int flat = 0;
    for (int i = 0; i < md; ++i) {
      const int hi_bit = (c >> i) & 1;
      wgt *= hi_bit ? tt[i] : (1.0 - tt[i]);
      flat = flat * static_cast<int>(grid.axes[i].size()) + lo[i] + hi_bit;
    }
    if (wgt == 0.0) continue;  // keeps node queries exact
    const AveragedCoeffs& nc = nodes[static_cast<std::size_t>(flat)];
    out.bbar += wgt * nc.bbar;
    out.btilde += wgt * nc.btilde;
    out.hbar += wgt * nc.hbar;
    out.abar += wgt * nc.abar;
    out.atilde += wgt * nc.atilde;
    out.sigbar += wgt * nc.sigbar;
    sqrt_atilde_out += wgt * sqrt_atilde[static_cast<std::size_t>(flat)];
    sqrt_excess_out += wgt * sqrt_excess[static_cast<std::size_t>(flat)];
  }
}

bool AveragedModel::inside(const Eigen::VectorXd& x, double margin_rel) const {
  for (int i = 0; i < grid.dims(); ++i) {
    const double a = grid.axes[i][0];
    const double b = grid.axes[i][grid.axes[i].size() - 1];
    const double margin = margin_rel * (b - a);
    if (x[i] < a - margin || x[i] > b + margin) return false;
  }
  return true;
}

namespace {

void attach_factors(AveragedModel& avg, double psd_tol) {
  avg.sqrt_atilde.clear();
  avg.sqrt_excess.clear();
  for (const auto& nc : avg.nodes) {
    double min_at = 0.0, min_ex = 0.0;
    const Eigen::MatrixXd excess = nc.abar - nc.sigbar * nc.sigbar.transpose();
    Eigen::MatrixXd sa = psd_sqrt(nc.atilde, &min_at);
    Eigen::MatrixXd sx = psd_sqrt(excess, &min_ex);
    if (min_at < -psd_tol * std::max(1.0, nc.atilde.norm()) ||
        min_ex < -psd_tol * std::max(1.0, nc.abar.norm())) {
      throw PSDViolation("tabulated coefficients violate positive semidefiniteness");
    }
    avg.sqrt_atilde.push_back(std::move(sa));
    avg.sqrt_excess.push_back(std::move(sx));
  }
}

}  // namespace

AveragedModel build_averaged_model(const MultiscaleModel& model, const TensorGrid& grid,
                                   const AveragingParams& params, std::uint64_t seed) {
  AveragedModel avg;
  avg.m = model.m;
  avg.w = model.w;
  avg.d = model.d;
  avg.grid = grid;
  const int P = grid.points();
  avg.nodes.resize(static_cast<std::size_t>(P));
  avg.diagnostics.resize(static_cast<std::size_t>(P));
  RngStream root = RngStream::root(seed).child(stream_id::averaging);
  for (int p = 0; p < P; ++p) {
    log_debug("averaging node " + std::to_string(p + 1) + "/" + std::to_string(P));
    avg.nodes[static_cast<std::size_t>(p)] =
        averaged_coefficients(model, grid.node(p), params, root.child(p).key(),
                              &avg.diagnostics[static_cast<std::size_t>(p)]);
  }
  attach_factors(avg, params.psd_tol);
  return avg;
}

AveragedModel tabulate_averaged_model(const AnalyticAveraged& fn, const TensorGrid& grid, int w,
                                      int d, double psd_tol) {
  AveragedModel avg;
  avg.grid = grid;
  avg.w = w;
  avg.d = d;
  const int P = grid.points();
  for (int p = 0; p < P; ++p) avg.nodes.push_back(fn(grid.node(p)));
  avg.m = avg.nodes.empty() ? 0 : static_cast<int>(avg.nodes.front().bbar.size());
  attach_factors(avg, psd_tol);
  return avg;
}

namespace {

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& a, int rows, int cols) {
  if (static_cast<int>(a.size()) != rows * cols) {
    throw ConfigError("avgmodel matrix entry has wrong length");
  }
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = a[k++].get<double>();
  return m;
}

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void save_averaged_model(const AveragedModel& avg, const std::string& path,
                         const Provenance& prov) {
  nlohmann::json j;
  j["version"] = "avgmodel-v1";
  j["m"] = avg.m;
  j["w"] = avg.w;
  j["d"] = avg.d;
  char hash_buf[24];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(prov.config_hash));
  j["provenance"] = {{"config", hash_buf}, {"seed", prov.seed}};
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& ax : avg.grid.axes) axes.push_back(vec_to_json(ax));
  j["axes"] = axes;
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t p = 0; p < avg.nodes.size(); ++p) {
    const AveragedCoeffs& nc = avg.nodes[p];
    nlohmann::json nj;
    nj["x"] = vec_to_json(avg.grid.node(static_cast<int>(p)));
    nj["bbar"] = vec_to_json(nc.bbar);
    nj["btilde"] = vec_to_json(nc.btilde);
    nj["hbar"] = vec_to_json(nc.hbar);
    nj["abar"] = mat_to_json(nc.abar);
    nj["atilde"] = mat_to_json(nc.atilde);
    nj["sigbar"] = mat_to_json(nc.sigbar);
    nj["sqrt_atilde"] = mat_to_json(avg.sqrt_atilde[p]);
    nj["sqrt_excess"] = mat_to_json(avg.sqrt_excess[p]);
    nodes.push_back(std::move(nj));
  }
  j["nodes"] = std::move(nodes);
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
}

AveragedModel load_averaged_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("avgmodel JSON parse failure: " + std::string(e.what()));
  }
  if (j.value("version", "") != std::string("avgmodel-v1")) {
    throw ConfigError("avgmodel version mismatch (want avgmodel-v1)");
  }
  AveragedModel avg;
  avg.m = j.at("m").get<int>();
  avg.w = j.at("w").get<int>();
  avg.d = j.at("d").get<int>();
  for (const auto& ax : j.at("axes")) avg.grid.axes.push_back(vec_from_json(ax));
  const int P = avg.grid.points();
  if (static_cast<int>(j.at("nodes").size()) != P) {
    throw ConfigError("avgmodel node count does not match grid");
  }
  for (const auto& nj : j.at("nodes")) {
    AveragedCoeffs nc;
    nc.bbar = vec_from_json(nj.at("bbar"));
    nc.btilde = vec_from_json(nj.at("btilde"));
    nc.hbar = vec_from_json(nj.at("hbar"));
    nc.abar = mat_from_json(nj.at("abar"), avg.m, avg.m);
    nc.atilde = mat_from_json(nj.at("atilde"), avg.m, avg.m);
    nc.sigbar = mat_from_json(nj.at("sigbar"), avg.m, avg.w);
    avg.nodes.push_back(std::move(nc));
    avg.sqrt_atilde.push_back(mat_from_json(nj.at("sqrt_atilde"), avg.m, avg.m));
    avg.sqrt_excess.push_back(mat_from_json(nj.at("sqrt_excess"), avg.m, avg.m));
  }
  return avg;
}

AssumptionReport check_assumptions(const MultiscaleModel& model, const AssumptionParams& params,
                                   std::uint64_t seed) {
  AssumptionReport rep;
  rep.hf_alpha = params.alpha;
  RngStream rng = RngStream::root(seed).child(0xC4EC4ULL);

  double hf_margin = std::numeric_limits<double>::infinity();
  double lam_min = std::numeric_limits<double>::infinity();
  double lam_max = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(model.m), z(model.n), fv(model.n);
  Eigen::MatrixXd gv(model.n, model.v);
  for (int p = 0; p < params.probes; ++p) {
    for (int i = 0; i < model.m; ++i) x[i] = params.x_spread * rng.normal();
    for (int i = 0; i < model.n; ++i) z[i] = rng.normal();
    const double zn = std::max(z.norm(), 1e-12);
    z *= params.radius * (0.75 + 0.5 * rng.uniform()) / zn;  // |z| near the probe radius
    model.f(x, z, fv);
    hf_margin = std::min(hf_margin, -fv.dot(z) / std::pow(z.norm(), params.alpha));
    model.g(x, z, gv);
    const Eigen::MatrixXd gg = gv * gv.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gg, Eigen::EigenvaluesOnly);
    lam_min = std::min(lam_min, es.eigenvalues().minCoeff());
    lam_max = std::max(lam_max, es.eigenvalues().maxCoeff());
  }
  rep.hf_margin = hf_margin;
  rep.hg_lambda_min = lam_min;
  rep.hg_lambda_max = lam_max;
  rep.hf_ok = hf_margin > 0.0;
  rep.hg_ok = lam_min > 0.0 && std::isfinite(lam_max);

  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.m);
  rep.centering_mean =
      check_centering(model, x0, params.stationary, mix64(seed ^ 0xCE47ULL), &rep.centering_se);
  rep.centering_ok = true;
  for (int j = 0; j < model.m; ++j) {
    if (std::abs(rep.centering_mean[j]) > 3.0 * rep.centering_se[j]) rep.centering_ok = false;
  }
  if (!rep.hf_ok) rep.notes.push_back("recurrence margin non-positive at probe radius");
  if (!rep.hg_ok) rep.notes.push_back("fast noise is not uniformly elliptic over probes");
  if (!rep.centering_ok) {
    rep.notes.push_back("intermediate drift fails centering at representative slow point");
  }
  return rep;
}

}  // namespace msf
