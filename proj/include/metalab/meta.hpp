#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metalab/expr.hpp"
#include "metalab/sim.hpp"

namespace metalab {

// --- Discrete chain over the attracting surfaces -------------------------

struct ChainSpec {
  std::vector<double> gammas;  // descending, all > 0
  Eigen::MatrixXd q;           // transition matrix, zero diagonal
  Eigen::VectorXd p0;          // initial weights

  int size() const { return static_cast<int>(gammas.size()); }
  void validate() const;
};

// Distribution of the chain at the hitting time of the first l states
// (exact absorbing-chain linear solve; no simulation).
Eigen::VectorXd chain_hitting_distribution(const ChainSpec& chain, int l);

// Monte Carlo counterpart, used as a consistency oracle.
Eigen::VectorXd chain_simulate(const ChainSpec& chain, int l, long n_samples,
                               std::uint64_t seed);

// --- Exit probabilities ---------------------------------------------------

struct ExitProbEstimate {
  int surface_id = 0;
  double zeta0 = 0, kappa1 = 0, kappa2 = 0, eps = 0;
  long n_traj = 0, n_outer = 0, n_inner = 0, n_timeout = 0, n_bad = 0;
  double empirical = 0;  // P(hit Gamma_kappa2 first)
  double std_error = 0;
  double predicted = 0;  // (zeta^g - k1^g) / (k2^g - k1^g)
  SimConfig cfg;
};

// Starts on Gamma_zeta0 (uniform in y, or phi-weighted over the grid
// nodes), runs to Gamma_kappa1 u Gamma_kappa2.
ExitProbEstimate estimate_exit_prob(const Engine& engine, int surface_id,
                                    double zeta0, double kappa1, double kappa2,
                                    const SimConfig& cfg,
                                    bool phi_weighted_start = false);

// --- Exit-time scaling ------------------------------------------------------

struct ExitTimeStats {
  int surface_id = 0;
  double kappa = 0;
  double r_start = 0;
  std::vector<double> eps_list;
  std::vector<double> mean_tau, std_error, timeout_frac;
  // log E tau = slope * log(1/eps) + intercept
  double loglog_slope = 0, loglog_slope_se = 0;
  // E tau = affine_slope * ln(kappa/eps) + affine_intercept
  double affine_slope = 0, affine_intercept = 0, affine_r2 = 0;
  SimConfig cfg;
};

// Starts at zeta = r_start*eps/2 (inside V_{0, r eps}), measures
// tau(Gamma_kappa) for each eps.
ExitTimeStats estimate_exit_time_scaling(const Engine& engine, int surface_id,
                                         double kappa,
                                         const std::vector<double>& eps_list,
                                         double r_start, const SimConfig& cfg);

// --- First-attraction weights p^x ------------------------------------------

struct PxEstimate {
  std::vector<int> attracting_ids;
  Eigen::VectorXd weights, std_errors;
  long n_traj = 0, n_timeout = 0, n_bad = 0;
  double probe_level = 0;  // r*eps, or kappa_probe when eps = 0
  SimConfig cfg;
};

PxEstimate estimate_p_x(const Engine& engine, const Eigen::VectorXd& x,
                        const SimConfig& cfg, double r = 10.0,
                        double kappa_probe = 1e-2);

// --- Transition matrix q_ij -------------------------------------------------

struct QMatrixEstimate {
  std::vector<int> attracting_ids;
  Eigen::MatrixXd q, std_errors;
  Eigen::MatrixXd q_half;  // same protocol at eps/2
  double drift = 0;        // max |q - q_half|: convergence diagnostic
  double eps = 0, r = 0;
  long n_traj_per_row = 0, n_timeout = 0;
  SimConfig cfg;
};

QMatrixEstimate estimate_qmatrix(const Engine& engine, double eps, double r,
                                 const SimConfig& cfg);

// --- Endpoint laws ----------------------------------------------------------

struct HistogramSpec {
  double lo0 = -2, hi0 = 2, lo1 = -2, hi1 = 2;
  int n0 = 20, n1 = 20;
};

struct OccupationHistogram {
  HistogramSpec spec;
  std::vector<double> mass;  // n0*n1, sums to 1 once normalized
  long total_count = 0;

  void init(const HistogramSpec& s);
  void add(double x0, double x1);
  void normalize();
};

double tv_distance(const OccupationHistogram& a, const OccupationHistogram& b);

struct MetastableResult {
  double t = 0, eps = 0, kappa_report = 0;
  std::vector<int> attracting_ids;
  Eigen::VectorXd surface_weights;  // mass with zeta_k < kappa_report
  double far_mass = 0;
  OccupationHistogram histogram;  // all endpoints, first two coordinates
  long n_traj = 0, n_bad = 0;
  SimConfig cfg;
};

MetastableResult metastable_distribution(const Engine& engine,
                                         const Eigen::VectorXd& x, double t,
                                         const SimConfig& cfg,
                                         double kappa_report = 0.05,
                                         const HistogramSpec& hist = {});

// Time-averaged occupation of one long unperturbed trajectory after
// burn-in (all surfaces must be repelling).
OccupationHistogram unperturbed_invariant_measure(
    const Engine& engine, const Eigen::VectorXd& x0, double t_total,
    double burn_in, double sample_dt, const SimConfig& cfg,
    const HistogramSpec& hist = {});

// --- Feynman-Kac -------------------------------------------------------------

struct FeynmanKacResult {
  double value = 0, std_error = 0;
  long n_traj = 0, n_bad = 0;
  SimConfig cfg;
};

FeynmanKacResult feynman_kac(const Engine& engine, const expr::Expr& g,
                             const Eigen::VectorXd& x, double t,
                             const SimConfig& cfg);

}  // namespace metalab
