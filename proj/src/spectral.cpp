#include "metalab/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "metalab/errors.hpp"
#include "metalab/simd.hpp"

namespace metalab {

namespace {

// Bernoulli function t / (e^t - 1); nonnegative, Ber(-t) = Ber(t) + t.
double bernoulli(double t) {
  if (std::fabs(t) < 1e-10) return 1.0 - 0.5 * t;
  if (t > 700.0) return 0.0;
  return t / std::expm1(t);
}

}  // namespace

void GeneratorMatrix::apply(const double* x, double* y) const {
  simd::matvec(data.data(), x, y, n, n);
}

double GeneratorMatrix::min_off_diagonal() const {
  double m = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (r != c) m = std::min(m, at(r, c));
  return m;
}

double GeneratorMatrix::max_abs_row_sum() const {
  double m = 0.0;
  for (int r = 0; r < n; ++r) {
    double s = simd::sum(data.data() + static_cast<std::size_t>(r) * n, n);
    m = std::max(m, std::fabs(s));
  }
  return m;
}

GeneratorMatrix discretize_generator(const SCoefficients& co, double gamma) {
  const SGrid& g = co.grid;
  const int n = g.size();
  GeneratorMatrix mat;
  mat.n = n;
  mat.gamma = gamma;
  mat.data.assign(static_cast<std::size_t>(n) * n, 0.0);

  const bool two_dim = g.two_dim();
  for (int i = 0; i < g.n0; ++i) {
    for (int j = 0; j < g.n1; ++j) {
      int k = g.index(i, j);
      double* row = mat.data.data() + static_cast<std::size_t>(k) * n;

      // Direction 0: exponentially fitted a d^2/dt0^2 + drift d/dt0.
      {
        double a = co.a0[k];
        if (a <= 0)
          throw EllipticityFailure("nonpositive diffusion coefficient at node " +
                                   std::to_string(k));
        double drift = co.b0[k] + gamma * co.c0[k];
        double p = drift * g.h0 / a;
        double east = a / (g.h0 * g.h0) * bernoulli(-p);
        double west = a / (g.h0 * g.h0) * bernoulli(p);
        row[g.neighbor0(i, j, +1)] += east;
        row[g.neighbor0(i, j, -1)] += west;
        row[k] -= east + west;
      }

      if (two_dim) {
        double a = co.a1[k];
        if (a <= 0)
          throw EllipticityFailure("nonpositive diffusion coefficient at node " +
                                   std::to_string(k));
        double drift = co.b1[k] + gamma * co.c1[k];
        double p = drift * g.h1 / a;
        double east = a / (g.h1 * g.h1) * bernoulli(-p);
        double west = a / (g.h1 * g.h1) * bernoulli(p);
        row[g.neighbor1(i, j, +1)] += east;
        row[g.neighbor1(i, j, -1)] += west;
        row[k] -= east + west;

        // Mixed derivative: corner stencil on the diagonal matching
        // sign(a01); edge deficits are clamped below.
        double a01 = co.a01[k];
        if (a01 != 0.0) {
          double w = std::fabs(a01) / (2.0 * g.h0 * g.h1);
          int sgn = a01 > 0 ? +1 : -1;
          // corners (+1, +sgn) and (-1, -sgn)
          {
            int kp = g.neighbor0(i, j, +1);
            int ip = kp / g.n1, jp = kp % g.n1;
            row[g.neighbor1(ip, jp, +sgn)] += w;
            int km = g.neighbor0(i, j, -1);
            int im = km / g.n1, jm = km % g.n1;
            row[g.neighbor1(im, jm, -sgn)] += w;
          }
          row[g.neighbor0(i, j, +1)] -= w;
          row[g.neighbor0(i, j, -1)] -= w;
          row[g.neighbor1(i, j, +1)] -= w;
          row[g.neighbor1(i, j, -1)] -= w;
          row[k] += 2.0 * w;
        }

        // Keep the Perron structure: move any negative off-diagonal mass
        // onto the diagonal (row sums are preserved).
        for (int c = 0; c < n; ++c) {
          if (c != k && row[c] < 0) {
            row[k] += row[c];
            row[c] = 0.0;
          }
        }
      }

      row[k] += gamma * (gamma - 1.0) * co.alpha[k] + gamma * co.beta[k];
    }
  }
  return mat;
}

std::vector<double> stationary_measure(const GeneratorMatrix& g0) {
  const int n = g0.n;
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = g0.at(c, r);  // transpose
  // Replace one equation by the normalization sum(pi) = 1; the dropped
  // row is a linear combination of the others when the kernel is 1-d.
  m.row(0).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[0] = 1.0;
  Eigen::VectorXd pi = m.partialPivLu().solve(rhs);

  if (!pi.allFinite())
    throw SingularSolve("stationary solve produced non-finite values");
  std::vector<double> out(pi.data(), pi.data() + n);
  // Residual of the full (unmodified) system.
  std::vector<double> resid(n, 0.0);
  for (int r = 0; r < n; ++r)
    simd::axpy(out[r], g0.data.data() + static_cast<std::size_t>(r) * n,
               resid.data(), n);
  double rmax = simd::max_abs(resid.data(), n);
  if (rmax > 1e-10)
    throw SingularSolve("stationary residual " + std::to_string(rmax) +
                        " indicates a degenerate null space");
  double mn = *std::min_element(out.begin(), out.end());
  if (mn < -1e-12)
    throw SingularSolve("stationary vector has negative mass " +
                        std::to_string(mn));
  double total = 0.0;
  for (double& w : out) {
    w = std::max(w, 0.0);
    total += w;
  }
  for (double& w : out) w /= total;
  return out;
}

TopEig top_eigenvalue(const GeneratorMatrix& g, const PowerOptions& opt) {
  const int n = g.n;
  if (g.min_off_diagonal() < 0)
    throw Error("top_eigenvalue requires nonnegative off-diagonals");

  double s = 0.0;
  for (int r = 0; r < n; ++r) s = std::max(s, std::fabs(g.at(r, r)));
  s += 1.0;

  std::vector<double> v(n, 1.0);
  if (opt.warm_start && static_cast<int>(opt.warm_start->size()) == n)
    v = *opt.warm_start;
  double nrm = std::sqrt(simd::dot(v.data(), v.data(), n));
  if (nrm == 0) throw NoConvergence("zero start vector");
  simd::scal(1.0 / nrm, v.data(), n);

  std::vector<double> u(n);
  g.apply(v.data(), u.data());
  double lambda = simd::dot(v.data(), u.data(), n);
  long iters = 0;
  int quiet = 0;
  for (; iters < opt.max_iter; ++iters) {
    // v <- normalize(u + s v); u <- G v
    simd::scal(s, v.data(), n);
    simd::axpy(1.0, u.data(), v.data(), n);
    nrm = std::sqrt(simd::dot(v.data(), v.data(), n));
    if (!(nrm > 0) || !std::isfinite(nrm))
      throw NoConvergence("power iteration collapsed");
    simd::scal(1.0 / nrm, v.data(), n);
    g.apply(v.data(), u.data());
    double lambda_new = simd::dot(v.data(), u.data(), n);
    bool rq_ok =
        std::fabs(lambda_new - lambda) <= opt.rq_tol * std::max(1.0, std::fabs(lambda_new));
    lambda = lambda_new;
    quiet = rq_ok ? quiet + 1 : 0;
    if (quiet >= 2) {
      if (opt.residual_tol > 0) {
        double vinf = simd::max_abs(v.data(), n);
        double res = 0.0;
        for (int r = 0; r < n; ++r)
          res = std::max(res, std::fabs(u[r] - lambda * v[r]));
        if (res <= opt.residual_tol * vinf) break;
        quiet = 0;  // keep polishing the eigenvector
      } else {
        break;
      }
    }
  }
  if (iters >= opt.max_iter)
    throw NoConvergence("power iteration did not converge in " +
                        std::to_string(opt.max_iter) + " iterations");

  // Orient and normalize.
  double mx = 0.0;
  for (double x : v)
    if (std::fabs(x) > std::fabs(mx)) mx = x;
  if (mx < 0) simd::scal(-1.0, v.data(), n);
  double scale;
  if (opt.pi) {
    double mass = 0.0;
    for (int r = 0; r < n; ++r) mass += v[r] * (*opt.pi)[r];
    if (!(mass > 0))
      throw NoConvergence("eigenvector has nonpositive pi-mass");
    scale = 1.0 / mass;
  } else {
    scale = 1.0 / simd::max_abs(v.data(), n);
  }
  simd::scal(scale, v.data(), n);
  double vmin = *std::min_element(v.begin(), v.end());
  if (vmin <= 0)
    throw NoConvergence("top eigenvector is not positive (min " +
                        std::to_string(vmin) + ")");
  return {lambda, std::move(v), iters};
}

namespace {

struct LambdaEval {
  const SCoefficients& co;
  const std::vector<double>& pi;
  PowerOptions power;
  std::vector<double> last_psi;
  std::vector<std::pair<double, double>>* curve;

  double operator()(double gamma, double residual_tol = 0.0) {
    GeneratorMatrix g = discretize_generator(co, gamma);
    PowerOptions opt = power;
    opt.warm_start = last_psi.empty() ? nullptr : &last_psi;
    opt.pi = &pi;
    opt.residual_tol = residual_tol;
    TopEig eig = top_eigenvalue(g, opt);
    last_psi = eig.psi;
    if (curve) curve->emplace_back(gamma, eig.lambda);
    return eig.lambda;
  }
};

}  // namespace

SpectralSolution solve_gamma(const SCoefficients& co, const SolveOptions& opt) {
  SpectralSolution sol;
  sol.surface_id = co.surface_id;
  sol.grid = co.grid;

  GeneratorMatrix g0 = discretize_generator(co, 0.0);
  sol.pi = stationary_measure(g0);

  const int n = co.grid.size();
  sol.alpha_bar = 0.0;
  sol.beta_bar = 0.0;
  for (int k = 0; k < n; ++k) {
    sol.alpha_bar += co.alpha[k] * sol.pi[k];
    sol.beta_bar += co.beta[k] * sol.pi[k];
  }
  if (std::fabs(sol.alpha_bar - sol.beta_bar) <= opt.degenerate_tol)
    throw DegenerateCase("alpha_bar and beta_bar coincide within " +
                         std::to_string(opt.degenerate_tol));

  double side = sol.alpha_bar > sol.beta_bar ? 1.0 : -1.0;
  LambdaEval lambda{co, sol.pi, opt.power, {}, &sol.lambda_curve};

  // lambda(0) = 0: record the anchor explicitly.
  lambda(0.0);

  // Find a point with lambda < 0 on the chosen side, then double outward
  // until the sign changes.
  double ga = side * 0.0625;
  double la = lambda(ga);
  while (la >= 0 && std::fabs(ga) > 1e-7) {
    ga *= 0.25;
    la = lambda(ga);
  }
  if (la >= 0)
    throw DegenerateCase("lambda does not decrease on the predicted side");
  double gb = 2.0 * ga;
  double lb = lambda(gb);
  while (lb < 0) {
    gb *= 2.0;
    if (std::fabs(gb) > opt.gamma_cap)
      throw NoBracket("no sign change of lambda for |gamma| <= " +
                      std::to_string(opt.gamma_cap));
    lb = lambda(gb);
  }

  // Secant within the bracket, bisection fallback.
  double root;
  while (true) {
    if (std::fabs(gb - ga) <= opt.root_tol) {
      root = 0.5 * (ga + gb);
      break;
    }
    double cand = ga - la * (gb - ga) / (lb - la);
    double lo = std::min(ga, gb), hi = std::max(ga, gb);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (ga + gb);
    // Guard against stagnating at an endpoint.
    double span = hi - lo;
    cand = std::clamp(cand, lo + 1e-3 * span, hi - 1e-3 * span);
    double lc = lambda(cand);
    if (lc == 0.0) {
      root = cand;
      break;
    }
    if ((lc < 0) == (la < 0)) {
      ga = cand;
      la = lc;
    } else {
      gb = cand;
      lb = lc;
    }
  }

  sol.gamma = root;
  sol.attracting = root > 0;

  // Final eigenfunction with a tight residual.
  {
    GeneratorMatrix g = discretize_generator(co, root);
    PowerOptions popt = opt.power;
    popt.warm_start = lambda.last_psi.empty() ? nullptr : &lambda.last_psi;
    popt.pi = &sol.pi;
    popt.residual_tol = 5e-9;
    TopEig eig = top_eigenvalue(g, popt);
    sol.phi = std::move(eig.psi);
  }

  if (opt.uniqueness_probe) {
    for (int k = 1; k <= opt.probe_points; ++k) {
      double gamma = root * (1.0 + 3.0 * k / opt.probe_points);
      double l = lambda(gamma);
      if (l < -1e-6) sol.uniqueness_probe_ok = false;
    }
  }

  std::sort(sol.lambda_curve.begin(), sol.lambda_curve.end());

  sol.phi_pow.resize(n);
  for (int k = 0; k < n; ++k) sol.phi_pow[k] = std::pow(sol.phi[k], 1.0 / root);
  sol.alpha_max = *std::max_element(co.alpha.begin(), co.alpha.end());
  sol.beta_abs_max = 0.0;
  for (double b : co.beta) sol.beta_abs_max = std::max(sol.beta_abs_max, std::fabs(b));
  return sol;
}

SpectralSolution solve_surface(const ModelSpec& model, int surface_id,
                               const SolveOptions& opt) {
  const SurfaceSpec& s = model.surfaces[surface_id];
  SGrid grid = make_grid(s, opt.grid_n);
  LinearizationData lin =
      linearize(model, surface_id, s.kind == SurfaceKind::Circle ? grid.n0 : 1);
  SCoefficients co = assemble_coeffs(lin, grid);
  return solve_gamma(co, opt);
}

double SpectralSolution::zeta(const TubularPoint& p,
                              const SurfaceSpec& s) const {
  if (p.z <= 0) return 0.0;
  return phi_pow_at(sphere_coords(p, s)) * p.z;
}

double adapted_radius(const Eigen::VectorXd& x, const SurfaceSpec& s,
                      const SpectralSolution& sol) {
  try {
    TubularPoint p = to_tubular(x, s);
    return sol.zeta(p, s);
  } catch (const OnSurface&) {
    return 0.0;
  }
}

}  // namespace metalab
