#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "doctest.h"
#include "metalab/errors.hpp"
#include "metalab/spectral.hpp"
#include "support/models.hpp"

using namespace metalab;
using namespace metalab::testing;

namespace {

// Synthetic 1-d coefficient set on a circle grid.
SCoefficients synthetic_circle(int n, std::function<double(double)> alpha,
                               std::function<double(double)> beta,
                               std::function<double(double)> a,
                               std::function<double(double)> b,
                               std::function<double(double)> c) {
  SurfaceSpec s;
  s.kind = SurfaceKind::Point;
  s.id = 0;
  s.location = Eigen::Vector2d::Zero();
  SCoefficients co;
  co.surface_id = 0;
  co.grid = make_grid(s, n);
  co.alpha.resize(n);
  co.beta.resize(n);
  co.a0.resize(n);
  co.b0.resize(n);
  co.c0.resize(n);
  co.min_alpha = 1e9;
  co.min_ellipticity = 1e9;
  for (int i = 0; i < n; ++i) {
    double th = co.grid.coord0(i);
    co.alpha[i] = alpha(th);
    co.beta[i] = beta(th);
    co.a0[i] = a(th);
    co.b0[i] = b(th);
    co.c0[i] = c(th);
    co.min_alpha = std::min(co.min_alpha, co.alpha[i]);
    co.min_ellipticity = std::min(co.min_ellipticity, co.a0[i]);
  }
  return co;
}

SCoefficients model_a_coeffs(const ModelAParams& p, int n) {
  ModelSpec m = model_a(p);
  SGrid grid = make_grid(m.surfaces[0], n);
  LinearizationData lin = linearize(m, 0);
  return assemble_coeffs(lin, grid);
}

}  // namespace

TEST_CASE("discretize: constant potential is reproduced exactly") {
  auto co = synthetic_circle(
      64, [](double) { return 1.0; }, [](double) { return 0.25; },
      [](double) { return 1.0; }, [](double) { return 0.0; },
      [](double) { return 0.0; });
  double gamma = 0.6;
  GeneratorMatrix g = discretize_generator(co, gamma);
  double v0 = gamma * (gamma - 1) * 1.0 + gamma * 0.25;
  TopEig eig = top_eigenvalue(g);
  CHECK(eig.lambda == doctest::Approx(v0).epsilon(1e-10));
}

TEST_CASE("discretize: zero row sums at gamma = 0") {
  SCoefficients co = model_a_coeffs({}, 64);
  GeneratorMatrix g = discretize_generator(co, 0.0);
  CHECK(g.max_abs_row_sum() < 1e-12);
  CHECK(g.min_off_diagonal() >= 0.0);
  // Strong drift: exponential fitting keeps off-diagonals nonnegative.
  auto hard = synthetic_circle(
      32, [](double) { return 1.0; }, [](double) { return 0.0; },
      [](double) { return 0.01; }, [](double th) { return 5.0 + 4.0 * std::sin(th); },
      [](double) { return 0.0; });
  GeneratorMatrix g2 = discretize_generator(hard, 0.0);
  CHECK(g2.min_off_diagonal() >= 0.0);
  CHECK(g2.max_abs_row_sum() < 1e-9);
}

TEST_CASE("discretize: constant coefficients give a circulant matrix") {
  auto co = synthetic_circle(
      32, [](double) { return 1.0; }, [](double) { return 0.0; },
      [](double) { return 0.7; }, [](double) { return 1.3; },
      [](double) { return 0.0; });
  GeneratorMatrix g = discretize_generator(co, 0.0);
  const int n = g.n;
  for (int r = 1; r < n; ++r)
    for (int c = 0; c < n; ++c)
      CHECK(g.at(r, c) == doctest::Approx(g.at(0, (c - r + n) % n)).epsilon(1e-14));

  // Circulant spectrum via the DFT of the first row: lambda_k =
  // sum_j row0[j] exp(2 pi i k j / n). Verify the matrix action on the
  // corresponding Fourier vectors and a nonpositive real part.
  for (int k : {0, 1, 5, 13}) {
    std::complex<double> lam(0, 0);
    for (int j = 0; j < n; ++j)
      lam += g.at(0, j) * std::exp(std::complex<double>(0, 2 * M_PI * k * j / n));
    std::vector<double> re(n), im(n), out_re(n), out_im(n);
    for (int j = 0; j < n; ++j) {
      re[j] = std::cos(2 * M_PI * k * j / n);
      im[j] = std::sin(2 * M_PI * k * j / n);
    }
    g.apply(re.data(), out_re.data());
    g.apply(im.data(), out_im.data());
    for (int j = 0; j < n; ++j) {
      // G (re + i im) = lam (re + i im): real part.
      CHECK(out_re[j] == doctest::Approx(lam.real() * re[j] - lam.imag() * im[j])
                             .epsilon(1e-9));
    }
    CHECK(lam.real() <= 1e-12);
    if (k == 0) CHECK(std::abs(lam) < 1e-12);
  }
}

TEST_CASE("stationary measure: uniform for constant coefficients") {
  SCoefficients co = model_a_coeffs({}, 64);
  GeneratorMatrix g = discretize_generator(co, 0.0);
  std::vector<double> pi = stationary_measure(g);
  double total = 0;
  for (double w : pi) {
    CHECK(w == doctest::Approx(1.0 / 64).epsilon(1e-10));
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stationary measure: 1-d sine drift has the closed-form density") {
  const int n = 128;
  auto co = synthetic_circle(
      n, [](double) { return 1.0; }, [](double) { return 0.0; },
      [](double) { return 1.0; }, [](double th) { return std::sin(th); },
      [](double) { return 0.0; });
  GeneratorMatrix g = discretize_generator(co, 0.0);
  std::vector<double> pi = stationary_measure(g);
  // Zero-flux stationary density for u'' + sin(th) u': prop exp(-cos th).
  std::vector<double> oracle(n);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    oracle[i] = std::exp(-std::cos(co.grid.coord0(i)));
    total += oracle[i];
  }
  double worst = 0;
  for (int i = 0; i < n; ++i)
    worst = std::max(worst, std::fabs(pi[i] - oracle[i] / total));
  CHECK(worst < 1e-4);
}

TEST_CASE("top eigenvalue: kernel and shift identity") {
  SCoefficients co = model_a_coeffs({}, 64);
  GeneratorMatrix g = discretize_generator(co, 0.0);
  TopEig eig = top_eigenvalue(g);
  CHECK(std::fabs(eig.lambda) < 1e-10);
  for (double v : eig.psi) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  for (int k = 0; k < g.n; ++k) g.at(k, k) += 0.37;
  TopEig shifted = top_eigenvalue(g);
  CHECK(shifted.lambda == doctest::Approx(0.37).epsilon(1e-10));
}

TEST_CASE("model A: lambda curve closed form") {
  // potential is constant: lambda(g) = g(g-1) sigma^2/2 + g(a + sigma^2/2)
  ModelAParams p;  // a = -0.5, sigma = 1
  SCoefficients co = model_a_coeffs(p, 64);
  for (double gamma : {0.3, 0.7, 1.5, -0.8}) {
    GeneratorMatrix g = discretize_generator(co, gamma);
    TopEig eig = top_eigenvalue(g);
    double expect = gamma * (gamma - 1) * 0.5 + gamma * (-0.5 + 0.5);
    CHECK(eig.lambda == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("solve_gamma: constant-ratio closed form gamma = 1 - c") {
  auto co = synthetic_circle(
      64, [](double) { return 1.0; }, [](double) { return 0.25; },
      [](double) { return 1.0; }, [](double th) { return 0.4 * std::sin(th); },
      [](double) { return 0.0; });
  SpectralSolution sol = solve_gamma(co);
  CHECK(sol.gamma == doctest::Approx(0.75).epsilon(1e-8));
  double mx = *std::max_element(sol.phi.begin(), sol.phi.end());
  double mn = *std::min_element(sol.phi.begin(), sol.phi.end());
  CHECK((mx - mn) / mx < 1e-6);
  CHECK(sol.attracting);
}

TEST_CASE("solve_gamma: model A closed form and classification") {
  {
    ModelAParams p;
    p.a = -0.5;
    SpectralSolution sol = solve_gamma(model_a_coeffs(p, 64));
    CHECK(sol.gamma == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.attracting);
    CHECK((sol.alpha_bar > sol.beta_bar) == (sol.gamma > 0));
  }
  {
    ModelAParams p;
    p.a = 0.5;
    SpectralSolution sol = solve_gamma(model_a_coeffs(p, 64));
    CHECK(sol.gamma == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(!sol.attracting);
    CHECK((sol.alpha_bar > sol.beta_bar) == (sol.gamma > 0));
  }
}

TEST_CASE("solve_gamma: degenerate when alpha_bar = beta_bar") {
  // a = -sigma^2/2 makes beta == alpha pointwise.
  ModelAParams p;
  p.a = -0.5;
  p.sigma = 1.0;
  auto co = model_a_coeffs(p, 32);
  for (int i = 0; i < 32; ++i) co.beta[i] = co.alpha[i];
  CHECK_THROWS_AS(solve_gamma(co), DegenerateCase);
}

TEST_CASE("lambda anchors: lambda(0) = 0 and the slope sign rule") {
  auto check_model = [](const SCoefficients& co) {
    GeneratorMatrix g0 = discretize_generator(co, 0.0);
    std::vector<double> pi = stationary_measure(g0);
    double abar = 0, bbar = 0;
    for (int i = 0; i < co.grid.size(); ++i) {
      abar += co.alpha[i] * pi[i];
      bbar += co.beta[i] * pi[i];
    }
    CHECK(std::fabs(top_eigenvalue(g0).lambda) < 1e-10);
    const double h = 1e-4;
    double lp = top_eigenvalue(discretize_generator(co, h)).lambda;
    double lm = top_eigenvalue(discretize_generator(co, -h)).lambda;
    double slope = (lp - lm) / (2 * h);
    CHECK(slope * (bbar - abar) > 0);
    CHECK(slope == doctest::Approx(bbar - abar).epsilon(1e-4));
  };
  check_model(model_a_coeffs({}, 48));
  // A few randomized synthetic models.
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  for (int k = 0; k < 5; ++k) {
    double c1 = u(rng), c2 = u(rng), c3 = u(rng), c4 = u(rng);
    auto co = synthetic_circle(
        48, [&](double th) { return 0.8 + 0.3 * c1 * std::cos(th); },
        [&](double th) { return 0.5 * c2 + 0.2 * std::sin(th + c3); },
        [&](double th) { return 1.0 + 0.4 * c4 * std::sin(th); },
        [&](double th) { return 0.5 * std::cos(th); },
        [&](double th) { return 0.1 * std::sin(2 * th); });
    check_model(co);
  }
}

TEST_CASE("solve_gamma: nonconstant eigenfunction, residual and convergence") {
  auto build = [](int n) {
    return synthetic_circle(
        n, [](double th) { return 1.0 + 0.3 * std::cos(th); },
        [](double th) { return 0.3 + 0.12 * std::sin(th); },
        [](double th) { return 1.0 + 0.2 * std::sin(th); },
        [](double th) { return 0.3 * std::cos(th); },
        [](double th) { return 0.1 + 0.05 * std::cos(th); });
  };
  SpectralSolution s32 = solve_gamma(build(32));
  SpectralSolution s64 = solve_gamma(build(64));
  SpectralSolution s128 = solve_gamma(build(128));
  double e1 = std::fabs(s32.gamma - s64.gamma);
  double e2 = std::fabs(s64.gamma - s128.gamma);
  double rate = std::log2(e1 / e2);
  INFO("gamma: ", s32.gamma, " ", s64.gamma, " ", s128.gamma, " rate ", rate);
  CHECK(rate >= 1.8);

  // Residual of the eigenpair after normalization.
  const SpectralSolution& sol = s128;
  GeneratorMatrix g = discretize_generator(build(128), sol.gamma);
  std::vector<double> r(g.n);
  g.apply(sol.phi.data(), r.data());
  double resid = 0;
  for (double v : r) resid = std::max(resid, std::fabs(v));
  CHECK(resid <= 1e-8);

  double mass = 0, mn = 1e30;
  for (int i = 0; i < g.n; ++i) {
    mass += sol.phi[i] * sol.pi[i];
    mn = std::min(mn, sol.phi[i]);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mn > 0);
  CHECK(sol.uniqueness_probe_ok);
}

TEST_CASE("solve_surface: 2-d grids reproduce the closed forms") {
  {
    SolveOptions opt;
    opt.grid_n = 16;
    SpectralSolution sol = solve_surface(model_sphere3d(-0.5, 1.0, 0.8), 0, opt);
    CHECK(sol.gamma == doctest::Approx(1.0).epsilon(1e-7));
    // Rotation-invariant L_y: pi is the uniform measure on the sphere,
    // i.e. node masses proportional to the quadrature weights.
    for (int k = 0; k < sol.grid.size(); ++k)
      CHECK(sol.pi[k] * 4.0 * M_PI / sol.grid.quad_weights[k] ==
            doctest::Approx(1.0).epsilon(0.05));
  }
  {
    SolveOptions opt;
    opt.grid_n = 16;
    SpectralSolution sol = solve_surface(model_torus3d(-0.5, 1.0, 0.8, 0.9), 0, opt);
    CHECK(sol.gamma == doctest::Approx(1.0).epsilon(1e-5));
  }
  {
    SolveOptions opt;
    opt.grid_n = 16;
    SpectralSolution sol = solve_surface(model_torus3d(0.3, 1.0, 0.8, 0.9), 0, opt);
    CHECK(sol.gamma == doctest::Approx(-0.6).epsilon(1e-5));
    CHECK(!sol.attracting);
  }
}

TEST_CASE("adapted radius: constant eigenfunction and homogeneity") {
  ModelSpec m = model_a();
  SolveOptions opt;
  opt.grid_n = 64;
  SpectralSolution sol = solve_surface(m, 0, opt);
  // phi is constant = 1, so zeta = z = |x|.
  Eigen::Vector2d x(0.12, -0.05);
  CHECK(adapted_radius(x, m.surfaces[0], sol) ==
        doctest::Approx(x.norm()).epsilon(1e-9));
  // On the surface: zeta = 0.
  CHECK(adapted_radius(Eigen::Vector2d::Zero(), m.surfaces[0], sol) == 0.0);
  // Outside the chart.
  CHECK_THROWS_AS(adapted_radius(Eigen::Vector2d(5.0, 0.0), m.surfaces[0], sol),
                  OutsideChart);
  // 1-homogeneity in z at fixed direction: exact under doubling.
  double z1 = adapted_radius(x, m.surfaces[0], sol);
  double z2 = adapted_radius(Eigen::Vector2d(2 * x), m.surfaces[0], sol);
  CHECK(z2 == 2.0 * z1);
}

TEST_CASE("adapted radius: nonconstant phi is exact at grid nodes") {
  auto co = synthetic_circle(
      64, [](double th) { return 1.0 + 0.3 * std::cos(th); },
      [](double th) { return 0.3 + 0.12 * std::sin(th); },
      [](double th) { return 1.0 + 0.2 * std::sin(th); },
      [](double th) { return 0.3 * std::cos(th); },
      [](double) { return 0.0; });
  SpectralSolution sol = solve_gamma(co);
  SurfaceSpec s;
  s.kind = SurfaceKind::Point;
  s.id = 0;
  s.location = Eigen::Vector2d::Zero();
  s.chart_radius = 1.0;
  for (int i = 0; i < 64; i += 7) {
    double th = co.grid.coord0(i);
    double z = 0.2;
    Eigen::Vector2d x(z * std::cos(th), z * std::sin(th));
    double expect = std::pow(sol.phi[i], 1.0 / sol.gamma) * z;
    CHECK(adapted_radius(x, s, sol) == doctest::Approx(expect).epsilon(1e-10));
  }
}
