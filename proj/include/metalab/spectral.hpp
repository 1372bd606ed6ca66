#pragma once

#include <utility>
#include <vector>

#include "metalab/coeffs.hpp"
#include "metalab/grid.hpp"

namespace metalab {

// Dense discretization of M(gamma) = L_y + gamma*D_y + (gamma(gamma-1)
// alpha + gamma beta) on the S-grid. Off-diagonals are kept nonnegative
// (exponentially fitted drift), so the Perron structure carries over.
struct GeneratorMatrix {
  int n = 0;
  std::vector<double> data;  // row-major
  double gamma = 0.0;

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * n + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * n + c];
  }
  void apply(const double* x, double* y) const;  // y = G x
  double min_off_diagonal() const;
  double max_abs_row_sum() const;
};

GeneratorMatrix discretize_generator(const SCoefficients& co, double gamma);

// Left null vector of a gamma = 0 generator, normalized to a probability
// vector. Throws SingularSolve when the null space is not 1-dimensional.
std::vector<double> stationary_measure(const GeneratorMatrix& g0);

struct PowerOptions {
  double rq_tol = 1e-12;
  long max_iter = 100000;
  const std::vector<double>* warm_start = nullptr;
  // If set, the eigenvector is normalized so sum psi_i pi_i = 1
  // (otherwise max-norm 1).
  const std::vector<double>* pi = nullptr;
  // If > 0, additionally require ||(G - lambda) psi||_inf <= residual_tol
  // * ||psi||_inf before stopping.
  double residual_tol = 0.0;
};

struct TopEig {
  double lambda = 0.0;
  std::vector<double> psi;
  long iterations = 0;
};

// Eigenvalue of maximal real part via shifted power iteration on
// (G + sI), s = max|diagonal| + 1. Requires nonnegative off-diagonals.
TopEig top_eigenvalue(const GeneratorMatrix& g, const PowerOptions& opt = {});

struct SolveOptions {
  int grid_n = 256;          // used by solve_surface
  double root_tol = 1e-10;
  double gamma_cap = 64.0;
  double degenerate_tol = 1e-8;
  bool uniqueness_probe = true;
  int probe_points = 16;
  PowerOptions power;
};

struct SpectralSolution {
  int surface_id = 0;
  SGrid grid;
  double gamma = 0.0;
  std::vector<double> phi;  // positive, sum phi*pi = 1
  std::vector<double> pi;   // probability weights
  double alpha_bar = 0.0, beta_bar = 0.0;
  bool attracting = false;
  std::vector<std::pair<double, double>> lambda_curve;  // sampled (gamma, lambda)
  bool uniqueness_probe_ok = true;

  std::vector<double> phi_pow;  // phi^(1/gamma) per node
  double alpha_max = 0.0, beta_abs_max = 0.0;  // for adaptive stepping

  double phi_pow_at(const SpherePoint& y) const {
    return grid_interp(grid, phi_pow, y);
  }
  // zeta = phi(y)^(1/gamma) * z
  double zeta(const TubularPoint& p, const SurfaceSpec& s) const;
};

SpectralSolution solve_gamma(const SCoefficients& co,
                             const SolveOptions& opt = {});

// Convenience: linearize + grid + assemble + solve for one surface.
SpectralSolution solve_surface(const ModelSpec& model, int surface_id,
                               const SolveOptions& opt = {});

// Adapted radial coordinate; zeta(x) = kappa iff x is on Gamma_kappa.
// Returns 0 on the surface itself; throws OutsideChart beyond the chart.
double adapted_radius(const Eigen::VectorXd& x, const SurfaceSpec& s,
                      const SpectralSolution& sol);

}  // namespace metalab
