#include "metalab/grid.hpp"

#include <cmath>

#include "metalab/errors.hpp"

namespace metalab {

int SGrid::neighbor0(int i, int j, int step) const {
  int ii = i + step;
  if (topology == GridTopology::Sphere) {
    // Crossing a pole keeps theta in range and flips the azimuth by pi.
    if (ii < 0 || ii >= n0) {
      ii = ii < 0 ? 0 : n0 - 1;
      j = (j + n1 / 2) % n1;
    }
    return index(ii, j);
  }
  ii = (ii % n0 + n0) % n0;
  return index(ii, j);
}

int SGrid::neighbor1(int i, int j, int step) const {
  int jj = ((j + step) % n1 + n1) % n1;
  return index(i, jj);
}

SGrid make_grid(const SurfaceSpec& s, int n) {
  if (n < 16) throw SchemaError("grid resolution must be at least 16");
  SGrid g;
  if (s.kind == SurfaceKind::Point && s.dim() == 2) {
    g.topology = GridTopology::Circle;
    g.n0 = n;
    g.n1 = 1;
    g.h0 = 2.0 * M_PI / n;
    g.quad_weights.assign(g.size(), g.h0);
  } else if (s.kind == SurfaceKind::Point && s.dim() == 3) {
    if (n % 2 != 0) throw SchemaError("sphere grid resolution must be even");
    g.topology = GridTopology::Sphere;
    g.n0 = n;            // polar, staggered
    g.n1 = 2 * n;        // azimuth
    g.h0 = M_PI / n;
    g.h1 = M_PI / n;
    g.origin0 = 0.5 * g.h0;
    g.quad_weights.resize(g.size());
    double total = 0.0;
    for (int i = 0; i < g.n0; ++i) {
      double w = std::sin(g.coord0(i)) * g.h0 * g.h1;
      for (int j = 0; j < g.n1; ++j) {
        g.quad_weights[g.index(i, j)] = w;
        total += w;
      }
    }
    // Scale to the exact surface measure 4*pi.
    double scale = 4.0 * M_PI / total;
    for (double& w : g.quad_weights) w *= scale;
  } else if (s.kind == SurfaceKind::Circle) {
    if (n % 2 != 0) throw SchemaError("torus grid resolution must be even");
    g.topology = GridTopology::Torus;
    g.n0 = n;  // m-angle
    g.n1 = n;  // normal angle
    g.h0 = 2.0 * M_PI / n;
    g.h1 = 2.0 * M_PI / n;
    g.surface_radius = s.radius;
    g.quad_weights.assign(g.size(), s.radius * g.h0 * g.h1);
  } else {
    throw SchemaError("no S-grid for this surface kind / dimension");
  }
  return g;
}

namespace {

// Fractional position of angle a on a periodic axis with spacing h.
void periodic_locate(double a, double h, int n, int& i0, double& frac) {
  double t = a / h;
  double fl = std::floor(t);
  frac = t - fl;
  i0 = static_cast<int>(fl) % n;
  if (i0 < 0) i0 += n;
}

}  // namespace

double grid_interp(const SGrid& g, const std::vector<double>& vals,
                   const SpherePoint& y) {
  if (g.topology == GridTopology::Circle) {
    int i0;
    double f;
    periodic_locate(y.coord[0], g.h0, g.n0, i0, f);
    int i1 = (i0 + 1) % g.n0;
    return (1 - f) * vals[i0] + f * vals[i1];
  }
  if (g.topology == GridTopology::Torus) {
    int i0, j0;
    double fi, fj;
    periodic_locate(y.coord[0], g.h0, g.n0, i0, fi);
    periodic_locate(y.coord[1], g.h1, g.n1, j0, fj);
    int i1 = (i0 + 1) % g.n0;
    int j1 = (j0 + 1) % g.n1;
    return (1 - fi) * ((1 - fj) * vals[g.index(i0, j0)] + fj * vals[g.index(i0, j1)]) +
           fi * ((1 - fj) * vals[g.index(i1, j0)] + fj * vals[g.index(i1, j1)]);
  }
  // Sphere: azimuth periodic, polar clamped to the staggered node range.
  double t = (y.coord[0] - g.origin0) / g.h0;
  t = std::clamp(t, 0.0, static_cast<double>(g.n0 - 1));
  int i0 = std::min(static_cast<int>(t), g.n0 - 2 >= 0 ? g.n0 - 2 : 0);
  double fi = t - i0;
  int j0;
  double fj;
  periodic_locate(y.coord[1], g.h1, g.n1, j0, fj);
  int i1 = std::min(i0 + 1, g.n0 - 1);
  int j1 = (j0 + 1) % g.n1;
  return (1 - fi) * ((1 - fj) * vals[g.index(i0, j0)] + fj * vals[g.index(i0, j1)]) +
         fi * ((1 - fj) * vals[g.index(i1, j0)] + fj * vals[g.index(i1, j1)]);
}

}  // namespace metalab
