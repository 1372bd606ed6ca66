#include "metalab/geometry.hpp"

#include <cmath>

#include "metalab/errors.hpp"

namespace metalab {

namespace {
constexpr double kOnSurfaceZ = 1e-14;
constexpr double kOrthoTol = 1e-12;

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a;
}
}  // namespace

Eigen::Vector3d SurfaceSpec::axis() const {
  Eigen::Vector3d u = plane_u.head<3>();
  Eigen::Vector3d v = plane_v.head<3>();
  return u.cross(v);
}

Eigen::VectorXd SurfaceSpec::circle_point(double theta) const {
  return center + radius * (std::cos(theta) * plane_u + std::sin(theta) * plane_v);
}

Eigen::VectorXd SurfaceSpec::circle_tangent(double theta) const {
  return -std::sin(theta) * plane_u + std::cos(theta) * plane_v;
}

void SurfaceSpec::validate() const {
  if (kind == SurfaceKind::Point) {
    if (location.size() < 2)
      throw SchemaError("point surface needs ambient dimension >= 2");
  } else {
    if (center.size() != 3)
      throw SchemaError("circle surfaces are supported in R^3 only");
    if (radius <= 0) throw SchemaError("circle radius must be positive");
    if (plane_u.size() != center.size() || plane_v.size() != center.size())
      throw SchemaError("circle plane vectors must match ambient dimension");
    if (std::fabs(plane_u.norm() - 1.0) > kOrthoTol ||
        std::fabs(plane_v.norm() - 1.0) > kOrthoTol ||
        std::fabs(plane_u.dot(plane_v)) > kOrthoTol)
      throw SchemaError("circle plane vectors must be orthonormal (1e-12)");
  }
  if (codim() < 2)
    throw SchemaError("surface codimension must be at least 2");
  if (chart_radius <= 0) throw SchemaError("chart radius must be positive");
}

double surface_distance(const Eigen::VectorXd& x, const SurfaceSpec& s) {
  if (s.kind == SurfaceKind::Point) return (x - s.location).norm();
  // Distance to a circle: split into in-plane and axial parts.
  Eigen::VectorXd rel = x - s.center;
  double cu = rel.dot(s.plane_u);
  double cv = rel.dot(s.plane_v);
  double in_plane = std::hypot(cu, cv);
  Eigen::VectorXd off = rel - cu * s.plane_u - cv * s.plane_v;
  return std::hypot(in_plane - s.radius, off.norm());
}

TubularPoint to_tubular(const Eigen::VectorXd& x, const SurfaceSpec& s) {
  TubularPoint p;
  p.surface_id = s.id;
  double z = surface_distance(x, s);
  if (z >= s.chart_radius)
    throw OutsideChart("point at distance " + std::to_string(z) +
                       " is outside the chart of surface " +
                       std::to_string(s.id));
  if (s.kind == SurfaceKind::Point) {
    p.m = s.location;
  } else {
    Eigen::VectorXd rel = x - s.center;
    double cu = rel.dot(s.plane_u);
    double cv = rel.dot(s.plane_v);
    double in_plane = std::hypot(cu, cv);
    if (in_plane < kOnSurfaceZ)
      throw OutsideChart("point on the circle axis has no nearest point");
    p.m_angle = wrap_angle(std::atan2(cv, cu));
    p.m = s.circle_point(p.m_angle);
  }
  p.z = z;
  if (z < kOnSurfaceZ)
    throw OnSurface("normal direction undefined at z = " + std::to_string(z));
  p.n = (x - p.m) / z;
  return p;
}

Eigen::VectorXd from_tubular(const TubularPoint& p, const SurfaceSpec& s) {
  if (p.z < 0 || p.z >= s.chart_radius)
    throw OutsideChart("z = " + std::to_string(p.z) +
                       " outside [0, chart radius)");
  return p.m + p.z * p.n;
}

SpherePoint sphere_coords(const TubularPoint& p, const SurfaceSpec& s) {
  SpherePoint y;
  y.surface_id = s.id;
  if (s.kind == SurfaceKind::Point) {
    if (s.dim() == 2) {
      y.n_coord = 1;
      y.coord[0] = wrap_angle(std::atan2(p.n[1], p.n[0]));
    } else if (s.dim() == 3) {
      y.n_coord = 2;
      y.coord[0] = std::acos(std::clamp(p.n[2], -1.0, 1.0));  // polar
      y.coord[1] = wrap_angle(std::atan2(p.n[1], p.n[0]));    // azimuth
    } else {
      throw SchemaError("angular coordinates implemented for d = 2, 3 only");
    }
  } else {
    // Torus chart: (m-angle, normal angle in the (radial, axis) frame).
    y.n_coord = 2;
    y.coord[0] = p.m_angle;
    Eigen::VectorXd radial =
        std::cos(p.m_angle) * s.plane_u + std::sin(p.m_angle) * s.plane_v;
    Eigen::Vector3d w = s.axis();
    double c = p.n.dot(radial);
    double sn = p.n.head<3>().dot(w);
    y.coord[1] = wrap_angle(std::atan2(sn, c));
  }
  return y;
}

void sphere_frame(const SpherePoint& y, const SurfaceSpec& s,
                  Eigen::VectorXd& m_out, Eigen::VectorXd& n_out) {
  if (s.kind == SurfaceKind::Point) {
    m_out = s.location;
    if (s.dim() == 2) {
      n_out.resize(2);
      n_out << std::cos(y.coord[0]), std::sin(y.coord[0]);
    } else if (s.dim() == 3) {
      double th = y.coord[0], ph = y.coord[1];
      n_out.resize(3);
      n_out << std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
          std::cos(th);
    } else {
      throw SchemaError("angular coordinates implemented for d = 2, 3 only");
    }
  } else {
    m_out = s.circle_point(y.coord[0]);
    Eigen::VectorXd radial =
        std::cos(y.coord[0]) * s.plane_u + std::sin(y.coord[0]) * s.plane_v;
    Eigen::Vector3d w = s.axis();
    n_out = std::cos(y.coord[1]) * radial;
    n_out.head<3>() += std::sin(y.coord[1]) * w;
  }
}

}  // namespace metalab
