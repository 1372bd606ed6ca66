#include "metalab/meta.hpp"

#include <algorithm>
#include <cmath>

#include "metalab/errors.hpp"

namespace metalab {

namespace {

std::vector<int> attracting_surfaces(const Engine& engine) {
  std::vector<int> ids;
  const ModelSpec& m = engine.model();
  for (int k = 0; k < static_cast<int>(m.surfaces.size()); ++k) {
    const SpectralSolution* sol = engine.solution(k);
    if (sol && sol->attracting) ids.push_back(k);
  }
  return ids;
}

// Uniform-in-y start on Gamma_zeta, or a phi-weighted draw over the
// grid nodes.
StartSampler level_start(const Engine& engine, int surface_id, double zeta0,
                         bool phi_weighted) {
  const SurfaceSpec& s = engine.model().surfaces[surface_id];
  const SpectralSolution* sol = engine.solution(surface_id);
  if (!sol) throw Error("no spectral solution for surface " +
                        std::to_string(surface_id));
  if (!phi_weighted) {
    return [&s, sol, zeta0](long, std::mt19937_64& rng) {
      SpherePoint y = sample_uniform_y(s, rng);
      return point_on_level(s, *sol, y, zeta0);
    };
  }
  // Categorical over nodes with weights phi * quadrature weight.
  std::vector<double> cum(sol->grid.size());
  double acc = 0;
  for (int k = 0; k < sol->grid.size(); ++k) {
    acc += sol->phi[k] * sol->grid.quad_weights[k];
    cum[k] = acc;
  }
  return [&s, sol, zeta0, cum, acc](long, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, acc);
    int k = static_cast<int>(
        std::lower_bound(cum.begin(), cum.end(), u(rng)) - cum.begin());
    k = std::min(k, sol->grid.size() - 1);
    SpherePoint y;
    y.surface_id = s.id;
    y.n_coord = sol->grid.two_dim() ? 2 : 1;
    y.coord[0] = sol->grid.coord0(k / sol->grid.n1);
    y.coord[1] = sol->grid.coord1(k % sol->grid.n1);
    return point_on_level(s, *sol, y, zeta0);
  };
}

double binom_se(double p, double n) {
  return n > 0 ? std::sqrt(std::max(p * (1 - p), 0.0) / n) : 0.0;
}

}  // namespace

// --- Exit probabilities -----------------------------------------------------

ExitProbEstimate estimate_exit_prob(const Engine& engine, int surface_id,
                                    double zeta0, double kappa1, double kappa2,
                                    const SimConfig& cfg,
                                    bool phi_weighted_start) {
  if (!(kappa1 < kappa2) || !(kappa1 <= zeta0 && zeta0 <= kappa2))
    throw SchemaError("need kappa1 <= zeta0 <= kappa2 with kappa1 < kappa2");
  if (!(kappa1 > 0)) throw SchemaError("kappa1 must be positive");
  const SurfaceSpec& s = engine.model().surfaces[surface_id];
  if (kappa2 > s.chart_radius)
    throw SchemaError("kappa2 exceeds the chart radius");

  ExitProbEstimate est;
  est.surface_id = surface_id;
  est.zeta0 = zeta0;
  est.kappa1 = kappa1;
  est.kappa2 = kappa2;
  est.eps = cfg.eps;
  est.cfg = cfg;
  est.n_traj = cfg.n_traj;

  std::vector<LevelTarget> targets = {{surface_id, kappa1},
                                      {surface_id, kappa2}};
  auto events = run_batch_hits(
      engine, level_start(engine, surface_id, zeta0, phi_weighted_start),
      targets, cfg);
  for (const HittingEvent& ev : events) {
    switch (ev.outcome) {
      case Outcome::Hit:
        (ev.target_index == 1 ? est.n_outer : est.n_inner)++;
        break;
      case Outcome::Timeout:
        est.n_timeout++;
        break;
      case Outcome::NonFinite:
        est.n_bad++;
        break;
    }
  }
  long done = est.n_outer + est.n_inner;
  if (est.n_timeout > cfg.n_traj / 100)
    throw TooManyTimeouts(std::to_string(est.n_timeout) + " of " +
                          std::to_string(cfg.n_traj) +
                          " trajectories timed out; raise t_max");
  est.empirical = done > 0 ? static_cast<double>(est.n_outer) / done : 0.0;
  est.std_error = binom_se(est.empirical, static_cast<double>(done));

  const SpectralSolution* sol = engine.solution(surface_id);
  double g = sol->gamma;
  est.predicted = (std::pow(zeta0, g) - std::pow(kappa1, g)) /
                  (std::pow(kappa2, g) - std::pow(kappa1, g));
  return est;
}

// --- Exit-time scaling --------------------------------------------------------

ExitTimeStats estimate_exit_time_scaling(const Engine& engine, int surface_id,
                                         double kappa,
                                         const std::vector<double>& eps_list,
                                         double r_start,
                                         const SimConfig& cfg_base) {
  if (eps_list.size() < 2)
    throw SchemaError("need at least two eps levels");
  for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
    if (!(eps_list[i] > eps_list[i + 1]))
      throw SchemaError("eps levels must be strictly decreasing");
  if (!engine.model().has_perturbation())
    throw SchemaError("exit-time scaling needs perturbation fields");

  ExitTimeStats st;
  st.surface_id = surface_id;
  st.kappa = kappa;
  st.r_start = r_start;
  st.eps_list = eps_list;
  st.cfg = cfg_base;

  for (double eps : eps_list) {
    SimConfig cfg = cfg_base;
    cfg.eps = eps;
    double zeta0 = 0.5 * r_start * eps;
    if (!(zeta0 < kappa))
      throw SchemaError("start level r*eps/2 must lie below kappa");
    auto events = run_batch_hits(
        engine, level_start(engine, surface_id, zeta0, false),
        {{surface_id, kappa}}, cfg);
    double sum = 0, sum2 = 0;
    long hits = 0, timeouts = 0;
    for (const HittingEvent& ev : events) {
      if (ev.outcome == Outcome::Hit) {
        sum += ev.t;
        sum2 += ev.t * ev.t;
        ++hits;
      } else {
        ++timeouts;
      }
    }
    if (timeouts > cfg.n_traj / 10)
      throw TimeoutDominated("eps = " + std::to_string(eps) + ": " +
                             std::to_string(timeouts) + " timeouts");
    double mean = hits > 0 ? sum / hits : 0.0;
    double var = hits > 1 ? (sum2 - hits * mean * mean) / (hits - 1) : 0.0;
    st.mean_tau.push_back(mean);
    st.std_error.push_back(hits > 0 ? std::sqrt(var / hits) : 0.0);
    st.timeout_frac.push_back(static_cast<double>(timeouts) / cfg.n_traj);
  }

  // Fit log E tau against log(1/eps).
  const int n = static_cast<int>(eps_list.size());
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      double x = std::log(1.0 / eps_list[i]);
      double y = std::log(st.mean_tau[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    st.loglog_slope = (n * sxy - sx * sy) / denom;
    double icept = (sy - st.loglog_slope * sx) / n;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
      double x = std::log(1.0 / eps_list[i]);
      double r = std::log(st.mean_tau[i]) - (st.loglog_slope * x + icept);
      ss += r * r;
    }
    st.loglog_slope_se =
        n > 2 ? std::sqrt(ss / (n - 2) / (sxx - sx * sx / n)) : 0.0;
  }
  // Fit E tau against ln(kappa/eps) (repelling surfaces: affine growth).
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
      double x = std::log(kappa / eps_list[i]);
      double y = st.mean_tau[i];
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      syy += y * y;
    }
    double denom = n * sxx - sx * sx;
    st.affine_slope = (n * sxy - sx * sy) / denom;
    st.affine_intercept = (sy - st.affine_slope * sx) / n;
    double ss_res = 0, ss_tot = 0, ybar = sy / n;
    for (int i = 0; i < n; ++i) {
      double x = std::log(kappa / eps_list[i]);
      double y = st.mean_tau[i];
      double fit = st.affine_slope * x + st.affine_intercept;
      ss_res += (y - fit) * (y - fit);
      ss_tot += (y - ybar) * (y - ybar);
    }
    st.affine_r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return st;
}

// --- p^x ------------------------------------------------------------------

PxEstimate estimate_p_x(const Engine& engine, const Eigen::VectorXd& x,
                        const SimConfig& cfg, double r, double kappa_probe) {
  PxEstimate est;
  est.attracting_ids = attracting_surfaces(engine);
  est.cfg = cfg;
  if (est.attracting_ids.empty())
    throw SchemaError("estimate_p_x needs at least one attracting surface");
  est.probe_level = cfg.eps > 0 ? r * cfg.eps : kappa_probe;
  est.n_traj = cfg.n_traj;

  std::vector<LevelTarget> targets;
  for (int k : est.attracting_ids) targets.push_back({k, est.probe_level});

  auto events = run_batch_hits(
      engine, [&x](long, std::mt19937_64&) { return x; }, targets, cfg);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(targets.size());
  for (const HittingEvent& ev : events) {
    if (ev.outcome == Outcome::Hit)
      counts[ev.target_index] += 1;
    else if (ev.outcome == Outcome::Timeout)
      est.n_timeout++;
    else
      est.n_bad++;
  }
  if (est.n_timeout > cfg.n_traj / 100)
    throw TooManyTimeouts(std::to_string(est.n_timeout) +
                          " timeouts in estimate_p_x");
  double done = counts.sum();
  est.weights = counts / done;
  est.std_errors = est.weights;
  for (int i = 0; i < est.weights.size(); ++i)
    est.std_errors[i] = binom_se(est.weights[i], done);
  return est;
}

// --- q_ij ---------------------------------------------------------------

namespace {

Eigen::MatrixXd qmatrix_once(const Engine& engine,
                             const std::vector<int>& ids, double eps, double r,
                             const SimConfig& cfg_base, long& timeouts,
                             Eigen::MatrixXd* se_out) {
  const int m = static_cast<int>(ids.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  if (se_out) *se_out = Eigen::MatrixXd::Zero(m, m);
  double level = r * eps;
  for (int i = 0; i < m; ++i) {
    SimConfig cfg = cfg_base;
    cfg.eps = eps;
    cfg.seed = cfg_base.seed + 7919 * static_cast<std::uint64_t>(i + 1);
    std::vector<LevelTarget> targets;
    for (int j = 0; j < m; ++j)
      if (j != i) targets.push_back({ids[j], level});
    auto events = run_batch_hits(
        engine, level_start(engine, ids[i], level, false), targets, cfg);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(targets.size());
    for (const HittingEvent& ev : events) {
      if (ev.outcome == Outcome::Hit)
        counts[ev.target_index] += 1;
      else
        ++timeouts;
    }
    double done = counts.sum();
    if (done < cfg.n_traj * 0.9)
      throw TooManyTimeouts("row " + std::to_string(i) + ": only " +
                            std::to_string(static_cast<long>(done)) + " of " +
                            std::to_string(cfg.n_traj) + " completed");
    int col = 0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      q(i, j) = counts[col] / done;
      if (se_out) (*se_out)(i, j) = binom_se(q(i, j), done);
      ++col;
    }
  }
  return q;
}

}  // namespace

QMatrixEstimate estimate_qmatrix(const Engine& engine, double eps, double r,
                                 const SimConfig& cfg) {
  QMatrixEstimate est;
  est.attracting_ids = attracting_surfaces(engine);
  est.eps = eps;
  est.r = r;
  est.cfg = cfg;
  est.n_traj_per_row = cfg.n_traj;
  if (est.attracting_ids.size() < 2)
    throw SchemaError("q-matrix estimation needs >= 2 attracting surfaces");
  for (int k : est.attracting_ids) {
    const SurfaceSpec& s = engine.model().surfaces[k];
    if (!(r * eps < s.chart_radius / 10))
      throw SchemaError("r*eps must be well inside the chart (r eps < r_chart/10)");
  }
  est.n_timeout = 0;
  est.q = qmatrix_once(engine, est.attracting_ids, eps, r, cfg, est.n_timeout,
                       &est.std_errors);
  long t2 = 0;
  est.q_half =
      qmatrix_once(engine, est.attracting_ids, eps / 2, r, cfg, t2, nullptr);
  est.drift = (est.q - est.q_half).cwiseAbs().maxCoeff();
  return est;
}

// --- Histograms ----------------------------------------------------------

void OccupationHistogram::init(const HistogramSpec& s) {
  spec = s;
  mass.assign(static_cast<std::size_t>(s.n0) * s.n1, 0.0);
  total_count = 0;
}

void OccupationHistogram::add(double x0, double x1) {
  int i = static_cast<int>((x0 - spec.lo0) / (spec.hi0 - spec.lo0) * spec.n0);
  int j = static_cast<int>((x1 - spec.lo1) / (spec.hi1 - spec.lo1) * spec.n1);
  i = std::clamp(i, 0, spec.n0 - 1);
  j = std::clamp(j, 0, spec.n1 - 1);
  mass[static_cast<std::size_t>(i) * spec.n1 + j] += 1.0;
  ++total_count;
}

void OccupationHistogram::normalize() {
  if (total_count == 0) return;
  for (double& m : mass) m /= static_cast<double>(total_count);
}

double tv_distance(const OccupationHistogram& a, const OccupationHistogram& b) {
  if (a.mass.size() != b.mass.size())
    throw SchemaError("histograms have different binnings");
  double tv = 0;
  for (std::size_t k = 0; k < a.mass.size(); ++k)
    tv += std::fabs(a.mass[k] - b.mass[k]);
  return 0.5 * tv;
}

// --- Metastable endpoint law ------------------------------------------------

MetastableResult metastable_distribution(const Engine& engine,
                                         const Eigen::VectorXd& x, double t,
                                         const SimConfig& cfg,
                                         double kappa_report,
                                         const HistogramSpec& hist) {
  MetastableResult res;
  res.t = t;
  res.eps = cfg.eps;
  res.kappa_report = kappa_report;
  res.cfg = cfg;
  res.attracting_ids = attracting_surfaces(engine);
  res.histogram.init(hist);
  res.n_traj = cfg.n_traj;

  auto ends = run_batch_endpoints(
      engine, [&x](long, std::mt19937_64&) { return x; }, t, cfg);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(res.attracting_ids.size());
  long far = 0;
  for (const Endpoint& e : ends) {
    if (!e.ok) {
      ++res.n_bad;
      continue;
    }
    res.histogram.add(e.state[0], e.state.size() > 1 ? e.state[1] : 0.0);
    bool near = false;
    for (std::size_t k = 0; k < res.attracting_ids.size(); ++k) {
      double zeta = engine.zeta(res.attracting_ids[k], e.state.data());
      if (zeta < kappa_report) {
        counts[k] += 1;
        near = true;
        break;
      }
    }
    if (!near) ++far;
  }
  long good = res.n_traj - res.n_bad;
  if (good > 0) {
    res.surface_weights = counts / static_cast<double>(good);
    res.far_mass = static_cast<double>(far) / good;
  }
  res.histogram.normalize();
  return res;
}

OccupationHistogram unperturbed_invariant_measure(
    const Engine& engine, const Eigen::VectorXd& x0, double t_total,
    double burn_in, double sample_dt, const SimConfig& cfg_in,
    const HistogramSpec& hist) {
  SimConfig cfg = cfg_in;
  cfg.eps = 0.0;
  OccupationHistogram out;
  out.init(hist);
  std::mt19937_64 rng = make_stream(cfg.seed, 0);
  Eigen::VectorXd x = x0;
  double t = 0;
  while (t < burn_in) {
    Endpoint e = engine.run_to_time(x, sample_dt, cfg, rng);
    if (!e.ok) throw NonFinite("trajectory blew up during burn-in");
    x = e.state;
    t += sample_dt;
  }
  while (t < t_total) {
    Endpoint e = engine.run_to_time(x, sample_dt, cfg, rng);
    if (!e.ok) throw NonFinite("trajectory blew up");
    x = e.state;
    t += sample_dt;
    out.add(x[0], x.size() > 1 ? x[1] : 0.0);
  }
  out.normalize();
  return out;
}

// --- Feynman-Kac --------------------------------------------------------------

FeynmanKacResult feynman_kac(const Engine& engine, const expr::Expr& g,
                             const Eigen::VectorXd& x, double t,
                             const SimConfig& cfg) {
  FeynmanKacResult res;
  res.cfg = cfg;
  res.n_traj = cfg.n_traj;
  auto ends = run_batch_endpoints(
      engine, [&x](long, std::mt19937_64&) { return x; }, t, cfg);
  double sum = 0, sum2 = 0;
  long good = 0;
  for (const Endpoint& e : ends) {
    if (!e.ok) {
      ++res.n_bad;
      continue;
    }
    double v = g.eval(e.state.data());
    sum += v;
    sum2 += v * v;
    ++good;
  }
  if (good > 0) {
    res.value = sum / good;
    double var = good > 1 ? (sum2 - good * res.value * res.value) / (good - 1)
                          : 0.0;
    res.std_error = std::sqrt(std::max(var, 0.0) / good);
  }
  return res;
}

}  // namespace metalab
