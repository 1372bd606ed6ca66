#pragma once

#include <vector>

#include "metalab/geometry.hpp"

namespace metalab {

enum class GridTopology { Circle, Sphere, Torus };

// Structured grid over S = M x S^{d-d'-1}. Circle: N angles. Sphere:
// staggered polar x azimuth (poles excluded). Torus: m-angle x normal
// angle, both periodic.
struct SGrid {
  GridTopology topology = GridTopology::Circle;
  int n0 = 0, n1 = 1;
  double h0 = 0.0, h1 = 0.0;
  double origin0 = 0.0, origin1 = 0.0;
  double surface_radius = 0.0;  // torus only: radius of M
  std::vector<double> quad_weights;

  int size() const { return n0 * n1; }
  int index(int i, int j) const { return i * n1 + j; }
  double coord0(int i) const { return origin0 + i * h0; }
  double coord1(int j) const { return origin1 + j * h1; }
  bool two_dim() const { return topology != GridTopology::Circle; }

  // Neighbor index in direction 0 with step +-1; handles periodic wrap
  // and the sphere pole identification (theta -> -theta, phi -> phi+pi).
  int neighbor0(int i, int j, int step) const;
  int neighbor1(int i, int j, int step) const;
};

// Grid matching the surface's S-manifold. n is the resolution per
// dimension (sphere azimuth gets 2n nodes, n must be even for the
// torus/sphere wrap).
SGrid make_grid(const SurfaceSpec& s, int n);

// Piecewise-(bi)linear interpolation of nodal values at angular
// coordinates y. Periodic where the topology is periodic; clamped in the
// polar direction of the sphere.
double grid_interp(const SGrid& g, const std::vector<double>& vals,
                   const SpherePoint& y);

}  // namespace metalab
