#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "metalab/coeffs.hpp"
#include "metalab/spectral.hpp"

namespace metalab {

enum class Scheme { HeunStratonovich, EulerCorrected };

struct SimConfig {
  double eps = 0.0;  // 0 reproduces the unperturbed process
  double dt = 1e-3;
  double t_max = 100.0;
  Scheme scheme = Scheme::HeunStratonovich;
  std::uint64_t seed = 1;
  long n_traj = 1;
  bool adaptive = true;
  double log_zeta_cap = 0.1;  // per-step cap on |d log zeta| near surfaces
  double state_bound = 1e6;
  int workers = 0;  // 0: METALAB_WORKERS env var, then hardware

  void validate() const;
};

// Deterministic per-trajectory stream: splitmix-style mix of (master
// seed, trajectory index). Distinct indices give distinct streams and
// results do not depend on worker scheduling.
std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index);

int resolve_workers(int requested);

// Deterministic parallel map: fn(i) for i in [0, n); outputs must be
// written into preallocated per-index slots by the caller.
void parallel_indexed(long n, int workers, const std::function<void(long)>& fn);

struct LevelTarget {
  int surface_id = 0;
  double kappa = 0.0;
};

enum class Outcome { Hit, Timeout, NonFinite };

struct HittingEvent {
  long traj = 0;
  Outcome outcome = Outcome::Timeout;
  double t = 0.0;
  int target_index = -1;  // index into the targets list when outcome == Hit
  Eigen::VectorXd state;
  double zeta = 0.0;  // adapted radius wrt the hit target's surface
};

struct Endpoint {
  long traj = 0;
  bool ok = true;  // false when the state blew up (NonFinite)
  Eigen::VectorXd state;
};

// Trajectory engine for X_t and X^eps_t. Immutable after construction;
// safe to use from any number of worker threads.
class Engine {
 public:
  // `sols` is aligned with model.surfaces; entries may be null when
  // no level-set queries are made against that surface.
  Engine(const ModelSpec& model,
         std::vector<const SpectralSolution*> sols = {});

  const ModelSpec& model() const { return *model_; }
  int dim() const { return model_->dim; }

  // 1/2 sum (Dv_i) v_i + eps^2/2 sum (Dvt_i) vt_i  (Ito drift correction)
  void strat_correction(const double* x, double eps, double* out) const;

  // One integration step in place; z_draws holds dim standard normals
  // (2*dim when eps > 0), reused by the Heun corrector.
  void step(double* x, double dt, double eps, Scheme scheme,
            const double* z_draws) const;

  // Adapted radius wrt surface k; +infinity outside the chart.
  double zeta(int surface_index, const double* x) const;
  const SpectralSolution* solution(int surface_index) const {
    return sols_[surface_index];
  }

  HittingEvent run_until_hit(const Eigen::VectorXd& x0,
                             const std::vector<LevelTarget>& targets,
                             const SimConfig& cfg, std::mt19937_64& rng) const;

  Endpoint run_to_time(const Eigen::VectorXd& x0, double t_end,
                       const SimConfig& cfg, std::mt19937_64& rng) const;

 private:
  const ModelSpec* model_;
  std::vector<const SpectralSolution*> sols_;
  double tilde_scale_ = 1.0;

  double effective_dt(const SimConfig& cfg, const double* zetas,
                      std::size_t n_zetas,
                      const std::vector<int>& zeta_surface) const;
};

using StartSampler = std::function<Eigen::VectorXd(long, std::mt19937_64&)>;

// Embarrassingly parallel batches; output order is trajectory-index
// order and results are bitwise reproducible for a fixed (seed, cfg)
// regardless of the worker count.
std::vector<HittingEvent> run_batch_hits(const Engine& engine,
                                         const StartSampler& start,
                                         const std::vector<LevelTarget>& targets,
                                         const SimConfig& cfg);

std::vector<Endpoint> run_batch_endpoints(const Engine& engine,
                                          const StartSampler& start,
                                          double t_end, const SimConfig& cfg);

// Euclidean point on the level set Gamma_zeta of a surface at angular
// coordinates y: x = m + (zeta / phi(y)^(1/gamma)) n.
Eigen::VectorXd point_on_level(const SurfaceSpec& s,
                               const SpectralSolution& sol,
                               const SpherePoint& y, double zeta_level);

// Uniform angular coordinates on S (surface measure).
SpherePoint sample_uniform_y(const SurfaceSpec& s, std::mt19937_64& rng);

}  // namespace metalab
