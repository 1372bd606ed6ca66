#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace metalab {

enum class SurfaceKind { Point, Circle };

// An invariant surface: a point in R^d (d >= 2) or a circle embedded in
// R^d (d >= 3). Codimension d - d_k must be at least 2.
struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::Point;
  int id = 0;
  double chart_radius = 1.0;

  // Point
  Eigen::VectorXd location;

  // Circle: center, radius, and an orthonormal pair spanning its plane.
  Eigen::VectorXd center;
  double radius = 0.0;
  Eigen::VectorXd plane_u, plane_v;

  int dim() const {
    return static_cast<int>(kind == SurfaceKind::Point ? location.size()
                                                       : center.size());
  }
  int intrinsic_dim() const { return kind == SurfaceKind::Point ? 0 : 1; }
  int codim() const { return dim() - intrinsic_dim(); }

  // Circle axis (normal of the plane); only meaningful in R^3.
  Eigen::Vector3d axis() const;

  // Point on the circle at angle theta.
  Eigen::VectorXd circle_point(double theta) const;
  // Unit tangent at angle theta.
  Eigen::VectorXd circle_tangent(double theta) const;

  // Throws SchemaError on violated invariants.
  void validate() const;
};

// Tubular-chart value of a Euclidean point: nearest surface point m,
// unit normal n, distance z, so that x = m + z*n.
struct TubularPoint {
  int surface_id = 0;
  Eigen::VectorXd m;
  double m_angle = 0.0;  // circle surfaces: angle of m
  Eigen::VectorXd n;
  double z = 0.0;
};

// Coordinates on S = M x S^{d-d'-1}. One angle for a point in R^2,
// (polar, azimuth) for a point in R^3, (m-angle, normal-angle) for a
// circle in R^3.
struct SpherePoint {
  int surface_id = 0;
  int n_coord = 1;
  std::array<double, 2> coord{0.0, 0.0};
};

// Distance from x to the surface (no chart-radius restriction).
double surface_distance(const Eigen::VectorXd& x, const SurfaceSpec& s);

// Throws OutsideChart if dist(x, M) >= chart radius, OnSurface if the
// normal direction is undefined (z < 1e-14).
TubularPoint to_tubular(const Eigen::VectorXd& x, const SurfaceSpec& s);

// Inverse chart. Requires 0 <= z < chart radius.
Eigen::VectorXd from_tubular(const TubularPoint& p, const SurfaceSpec& s);

// Angular coordinates of the (m, n) part of a tubular point.
SpherePoint sphere_coords(const TubularPoint& p, const SurfaceSpec& s);

// Embedded (m, n) for given angular coordinates.
void sphere_frame(const SpherePoint& y, const SurfaceSpec& s,
                  Eigen::VectorXd& m_out, Eigen::VectorXd& n_out);

}  // namespace metalab
