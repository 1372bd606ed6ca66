#include "metalab/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "metalab/errors.hpp"

namespace metalab {

void SimConfig::validate() const {
  if (!(dt > 0)) throw SchemaError("dt must be positive");
  if (!(t_max > 0)) throw SchemaError("t_max must be positive");
  if (eps < 0) throw SchemaError("eps must be nonnegative");
  if (n_traj < 0) throw SchemaError("n_traj must be nonnegative");
  if (!(log_zeta_cap > 0)) throw SchemaError("log_zeta_cap must be positive");
}

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master ^ (0x632BE59BD9B4E019ULL * (index + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("METALAB_WORKERS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_indexed(long n, int workers,
                      const std::function<void(long)>& fn) {
  if (n <= 0) return;
  workers = std::min<long>(workers, n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next(0);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        long i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

// --- Engine -----------------------------------------------------------

Engine::Engine(const ModelSpec& model,
               std::vector<const SpectralSolution*> sols)
    : model_(&model), sols_(std::move(sols)) {
  sols_.resize(model.surfaces.size(), nullptr);
  // Coarse bound on the perturbation field magnitudes near the surfaces,
  // used by the adaptive step control.
  if (model.has_perturbation()) {
    double mx = 0.0;
    double tmp[8];
    for (const SurfaceSpec& s : model.surfaces) {
      for (int p = 0; p < 16; ++p) {
        double angle = p * 2.0 * M_PI / 16;
        Eigen::VectorXd m = s.kind == SurfaceKind::Point
                                ? s.location
                                : s.circle_point(angle);
        for (int i = 1; i <= model.dim; ++i) {
          model.eval_vt(i, m.data(), tmp);
          mx = std::max(mx, Eigen::Map<Eigen::VectorXd>(tmp, model.dim).norm());
        }
      }
    }
    tilde_scale_ = std::max(mx, 1e-6);
  }
}

void Engine::strat_correction(const double* x, double eps, double* out) const {
  const int d = model_->dim;
  double jac[64], val[8];
  for (int k = 0; k < d; ++k) out[k] = 0;
  for (int i = 1; i <= d; ++i) {
    model_->v[i].jacobian(x, jac, d);
    model_->v[i].eval(x, val, d);
    for (int r = 0; r < d; ++r) {
      double acc = 0;
      for (int c = 0; c < d; ++c) acc += jac[r * d + c] * val[c];
      out[r] += 0.5 * acc;
    }
  }
  if (eps > 0 && model_->has_perturbation()) {
    double e2 = 0.5 * eps * eps;
    for (int i = 1; i <= d; ++i) {
      model_->v_tilde[i].jacobian(x, jac, d);
      model_->v_tilde[i].eval(x, val, d);
      for (int r = 0; r < d; ++r) {
        double acc = 0;
        for (int c = 0; c < d; ++c) acc += jac[r * d + c] * val[c];
        out[r] += e2 * acc;
      }
    }
  }
}

namespace {

// sum_i v_i(x) w_i + eps sum_i vt_i(x) wt_i with w = sqrt(dt) * draws
void noise_sum(const ModelSpec& model, const double* x, double eps,
               const double* w, double* out) {
  const int d = model.dim;
  double tmp[8];
  for (int k = 0; k < d; ++k) out[k] = 0;
  for (int i = 1; i <= d; ++i) {
    model.eval_v(i, x, tmp);
    for (int k = 0; k < d; ++k) out[k] += tmp[k] * w[i - 1];
  }
  if (eps > 0 && model.has_perturbation()) {
    for (int i = 1; i <= d; ++i) {
      model.eval_vt(i, x, tmp);
      for (int k = 0; k < d; ++k) out[k] += eps * tmp[k] * w[d + i - 1];
    }
  }
}

}  // namespace

void Engine::step(double* x, double dt, double eps, Scheme scheme,
                  const double* z_draws) const {
  const int d = model_->dim;
  double w[16];
  double sq = std::sqrt(dt);
  int n_noise = eps > 0 && model_->has_perturbation() ? 2 * d : d;
  for (int i = 0; i < n_noise; ++i) w[i] = sq * z_draws[i];

  double f0[8], g0[8];
  model_->drift(x, eps, f0);
  noise_sum(*model_, x, eps, w, g0);

  if (scheme == Scheme::EulerCorrected) {
    double corr[8];
    strat_correction(x, eps, corr);
    for (int k = 0; k < d; ++k) x[k] += (f0[k] + corr[k]) * dt + g0[k];
    return;
  }

  // Heun predictor-corrector with the same Gaussian increments: the
  // trapezoidal diffusion average converges to the Stratonovich integral.
  double xp[8], f1[8], g1[8];
  for (int k = 0; k < d; ++k) xp[k] = x[k] + f0[k] * dt + g0[k];
  model_->drift(xp, eps, f1);
  noise_sum(*model_, xp, eps, w, g1);
  for (int k = 0; k < d; ++k)
    x[k] += 0.5 * (f0[k] + f1[k]) * dt + 0.5 * (g0[k] + g1[k]);
}

double Engine::zeta(int surface_index, const double* x) const {
  const SurfaceSpec& s = model_->surfaces[surface_index];
  const SpectralSolution* sol = sols_[surface_index];
  if (!sol) throw Error("no spectral solution attached for surface " +
                        std::to_string(surface_index));
  Eigen::Map<const Eigen::VectorXd> xv(x, model_->dim);
  double z = surface_distance(xv, s);
  if (z >= s.chart_radius) return std::numeric_limits<double>::infinity();
  if (z < 1e-14) return 0.0;
  TubularPoint p = to_tubular(xv, s);
  return sol->zeta(p, s);
}

double Engine::effective_dt(const SimConfig& cfg, const double* zetas,
                            std::size_t n_zetas,
                            const std::vector<int>& zeta_surface) const {
  double dt = cfg.dt;
  if (!cfg.adaptive) return dt;
  double trigger = cfg.eps > 0 ? 10.0 * cfg.eps : 1e-3;
  const double cap = cfg.log_zeta_cap;
  for (std::size_t i = 0; i < n_zetas; ++i) {
    double zeta = zetas[i];
    if (!(zeta < trigger)) continue;
    const SpectralSolution* sol = sols_[zeta_surface[i]];
    double s_mult = std::sqrt(2.0 * sol->alpha_max);
    if (s_mult > 0) dt = std::min(dt, cap * cap / (9.0 * s_mult * s_mult));
    if (sol->beta_abs_max > 0)
      dt = std::min(dt, cap / (3.0 * sol->beta_abs_max));
    if (cfg.eps > 0) {
      // Additive noise at scale eps; saturate the distance at eps/3 so
      // the step never collapses deep inside the smeared region.
      double dist = std::max(zeta, cfg.eps / 3.0);
      double s_add = cfg.eps * tilde_scale_ / dist;
      dt = std::min(dt, cap * cap / (9.0 * s_add * s_add));
    }
  }
  return std::max(dt, cfg.dt * 0x1p-14);
}

namespace {

bool state_ok(const double* x, int d, double bound) {
  for (int k = 0; k < d; ++k)
    if (!std::isfinite(x[k]) || std::fabs(x[k]) > bound) return false;
  return true;
}

}  // namespace

HittingEvent Engine::run_until_hit(const Eigen::VectorXd& x0,
                                   const std::vector<LevelTarget>& targets,
                                   const SimConfig& cfg,
                                   std::mt19937_64& rng) const {
  const int d = model_->dim;
  HittingEvent ev;
  ev.state = x0;

  std::vector<int> tsurf(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    tsurf[i] = targets[i].surface_id;

  double zet[16], zet_new[16];
  for (std::size_t i = 0; i < targets.size(); ++i) {
    zet[i] = zeta(tsurf[i], x0.data());
    if (std::isfinite(zet[i]) &&
        std::fabs(zet[i] - targets[i].kappa) <=
            1e-12 * std::max(1.0, targets[i].kappa)) {
      ev.outcome = Outcome::Hit;
      ev.t = 0.0;
      ev.target_index = static_cast<int>(i);
      ev.zeta = zet[i];
      return ev;
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  double x[8], x_old[8];
  for (int k = 0; k < d; ++k) x[k] = x0[k];
  double z_draws[16];
  int n_noise = cfg.eps > 0 && model_->has_perturbation() ? 2 * d : d;

  double t = 0.0;
  while (t < cfg.t_max) {
    double dt = effective_dt(cfg, zet, targets.size(), tsurf);
    dt = std::min(dt, cfg.t_max - t);
    for (int k = 0; k < d; ++k) x_old[k] = x[k];
    for (int i = 0; i < n_noise; ++i) z_draws[i] = gauss(rng);
    step(x, dt, cfg.eps, cfg.scheme, z_draws);
    t += dt;

    if (!state_ok(x, d, cfg.state_bound)) {
      ev.outcome = Outcome::NonFinite;
      ev.t = t;
      ev.state = Eigen::Map<Eigen::VectorXd>(x_old, d);
      return ev;
    }

    // First crossing among the targets, located on the step segment.
    double best_s = 2.0;
    int best_target = -1;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      zet_new[i] = zeta(tsurf[i], x);
      double a = zet[i] - targets[i].kappa;
      double b = zet_new[i] - targets[i].kappa;
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      if (a == 0.0 || a * b < 0) {
        // bisection for the crossing fraction on the segment
        double lo = 0.0, hi = 1.0;
        double xs[8];
        for (int it = 0; it < 60; ++it) {
          double mid = 0.5 * (lo + hi);
          for (int k = 0; k < d; ++k)
            xs[k] = x_old[k] + mid * (x[k] - x_old[k]);
          double h = zeta(tsurf[i], xs) - targets[i].kappa;
          if ((h < 0) == (a < 0))
            lo = mid;
          else
            hi = mid;
        }
        double s = 0.5 * (lo + hi);
        if (s < best_s) {
          best_s = s;
          best_target = static_cast<int>(i);
        }
      }
    }
    if (best_target >= 0) {
      ev.outcome = Outcome::Hit;
      ev.t = t - dt + best_s * dt;
      ev.target_index = best_target;
      ev.state.resize(d);
      for (int k = 0; k < d; ++k)
        ev.state[k] = x_old[k] + best_s * (x[k] - x_old[k]);
      ev.zeta = zeta(tsurf[best_target], ev.state.data());
      return ev;
    }
    for (std::size_t i = 0; i < targets.size(); ++i) zet[i] = zet_new[i];
  }

  ev.outcome = Outcome::Timeout;
  ev.t = cfg.t_max;
  ev.state = Eigen::Map<Eigen::VectorXd>(x, d);
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < targets.size(); ++i) mn = std::min(mn, zet[i]);
  ev.zeta = mn;
  return ev;
}

Endpoint Engine::run_to_time(const Eigen::VectorXd& x0, double t_end,
                             const SimConfig& cfg,
                             std::mt19937_64& rng) const {
  const int d = model_->dim;
  Endpoint out;
  out.state = x0;

  // Track zeta for every surface with a solution attached so the
  // adaptive control can engage near any of them.
  std::vector<int> surf_ids;
  for (std::size_t k = 0; k < sols_.size(); ++k)
    if (sols_[k]) surf_ids.push_back(static_cast<int>(k));
  double zet[16];

  std::normal_distribution<double> gauss(0.0, 1.0);
  double x[8];
  for (int k = 0; k < d; ++k) x[k] = x0[k];
  double z_draws[16];
  int n_noise = cfg.eps > 0 && model_->has_perturbation() ? 2 * d : d;

  double t = 0.0;
  while (t < t_end) {
    for (std::size_t i = 0; i < surf_ids.size(); ++i)
      zet[i] = zeta(surf_ids[i], x);
    double dt = effective_dt(cfg, zet, surf_ids.size(), surf_ids);
    dt = std::min(dt, t_end - t);
    for (int i = 0; i < n_noise; ++i) z_draws[i] = gauss(rng);
    step(x, dt, cfg.eps, cfg.scheme, z_draws);
    t += dt;
    if (!state_ok(x, d, cfg.state_bound)) {
      out.ok = false;
      return out;
    }
  }
  out.state = Eigen::Map<Eigen::VectorXd>(x, d);
  return out;
}

// --- Batch runners ------------------------------------------------------

std::vector<HittingEvent> run_batch_hits(const Engine& engine,
                                         const StartSampler& start,
                                         const std::vector<LevelTarget>& targets,
                                         const SimConfig& cfg) {
  cfg.validate();
  std::vector<HittingEvent> out(cfg.n_traj);
  parallel_indexed(cfg.n_traj, resolve_workers(cfg.workers), [&](long i) {
    std::mt19937_64 rng = make_stream(cfg.seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x0 = start(i, rng);
    out[i] = engine.run_until_hit(x0, targets, cfg, rng);
    out[i].traj = i;
  });
  return out;
}

std::vector<Endpoint> run_batch_endpoints(const Engine& engine,
                                          const StartSampler& start,
                                          double t_end, const SimConfig& cfg) {
  cfg.validate();
  std::vector<Endpoint> out(cfg.n_traj);
  parallel_indexed(cfg.n_traj, resolve_workers(cfg.workers), [&](long i) {
    std::mt19937_64 rng = make_stream(cfg.seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x0 = start(i, rng);
    out[i] = engine.run_to_time(x0, t_end, cfg, rng);
    out[i].traj = i;
  });
  return out;
}

Eigen::VectorXd point_on_level(const SurfaceSpec& s,
                               const SpectralSolution& sol,
                               const SpherePoint& y, double zeta_level) {
  Eigen::VectorXd m, n;
  sphere_frame(y, s, m, n);
  double z = zeta_level / sol.phi_pow_at(y);
  return m + z * n;
}

SpherePoint sample_uniform_y(const SurfaceSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SpherePoint y;
  y.surface_id = s.id;
  if (s.kind == SurfaceKind::Point && s.dim() == 2) {
    y.n_coord = 1;
    y.coord[0] = angle(rng);
  } else if (s.kind == SurfaceKind::Point && s.dim() == 3) {
    y.n_coord = 2;
    y.coord[0] = std::acos(unit(rng));  // uniform on the sphere
    y.coord[1] = angle(rng);
  } else {
    y.n_coord = 2;
    y.coord[0] = angle(rng);
    y.coord[1] = angle(rng);
  }
  return y;
}

}  // namespace metalab
