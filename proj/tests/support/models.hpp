#pragma once

// Hand-built model specs shared by the unit and acceptance tests.
//
// Model A: single point surface at the origin in R^2 with exactly linear
//   fields v_0 = a x, v_1 = sigma x, v_2 = rho J x. The log-distance to
//   the origin is a Brownian motion with drift a and volatility sigma,
//   so first-passage laws have closed forms (gbm_oracle.hpp).
// Model B: two point surfaces in R^2, locally linear via blending.
// Model C: one repelling point at the origin (Model A with a > 0 and a
//   tight confinement), used for invariant-measure experiments.

#include <Eigen/Dense>

#include "metalab/coeffs.hpp"

namespace metalab::testing {

inline Eigen::Matrix2d rot90() {
  Eigen::Matrix2d j;
  j << 0, -1, 1, 0;
  return j;
}

struct ModelAParams {
  double a = -0.5;
  double sigma = 1.0;
  double rho = 0.7;
  double conf_radius = 3.0;
  double conf_strength = 2.0;
  bool with_perturbation = true;
};

inline ModelSpec model_a(const ModelAParams& p = {}) {
  ModelSpec m;
  m.dim = 2;
  m.name = "model_a";
  SurfaceSpec s;
  s.kind = SurfaceKind::Point;
  s.id = 0;
  s.location = Eigen::Vector2d::Zero();
  s.chart_radius = 1.0;
  m.surfaces.push_back(s);

  Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  Eigen::Vector2d zero = Eigen::Vector2d::Zero();
  m.v.push_back(FieldDescriptor::make_linear(p.a * eye, zero));
  m.v.push_back(FieldDescriptor::make_linear(p.sigma * eye, zero));
  m.v.push_back(FieldDescriptor::make_linear(p.rho * rot90(), zero));
  if (p.with_perturbation) {
    m.v_tilde.push_back(FieldDescriptor::make_zero(2));
    for (int i = 0; i < 2; ++i) {
      FieldDescriptor f;
      f.kind = FieldDescriptor::Kind::Explicit;
      f.components.push_back(expr::Expr::parse(i == 0 ? "1" : "0", 2));
      f.components.push_back(expr::Expr::parse(i == 0 ? "0" : "1", 2));
      m.v_tilde.push_back(std::move(f));
    }
  }
  m.confinement.radius = p.conf_radius;
  m.confinement.strength = p.conf_strength;
  return m;
}

struct ModelBParams {
  // Per-surface GBM parameters; gamma_k = -2 a_k / sigma_k^2.
  double a1 = -1.0, sigma1 = 1.0, rho1 = 0.7;
  double a2 = -0.5, sigma2 = 1.0, rho2 = 0.7;
  // Local cllocks: scale all surface-k matrices by clock_k without
  // changing gamma_k (a -> c a, sigma^2 -> c sigma^2).
  double clock1 = 1.0, clock2 = 1.0;
  double separation = 3.0;  // distance between the two points
  double r_inner = 0.6, r_outer = 1.2;
  double background = 0.5;
  double conf_radius = 3.5, conf_strength = 2.0;
};

inline ModelSpec model_b(const ModelBParams& p = {}) {
  ModelSpec m;
  m.dim = 2;
  m.name = "model_b";
  Eigen::Vector2d p1(-0.5 * p.separation, 0.0);
  Eigen::Vector2d p2(0.5 * p.separation, 0.0);
  for (int k = 0; k < 2; ++k) {
    SurfaceSpec s;
    s.kind = SurfaceKind::Point;
    s.id = k;
    s.location = k == 0 ? p1 : p2;
    s.chart_radius = 1.0;
    m.surfaces.push_back(s);
  }

  Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  double s1 = std::sqrt(p.clock1), s2 = std::sqrt(p.clock2);
  auto blend2 = [&](const Eigen::Matrix2d& A1, const Eigen::Matrix2d& A2,
                    const Eigen::Vector2d& bg) {
    FieldDescriptor f;
    f.kind = FieldDescriptor::Kind::Blend;
    LinearTerm t1{A1, p1, p.r_inner, p.r_outer};
    LinearTerm t2{A2, p2, p.r_inner, p.r_outer};
    f.terms = {t1, t2};
    if (bg.norm() > 0) {
      FieldDescriptor b;
      b.kind = FieldDescriptor::Kind::Explicit;
      b.components.push_back(
          expr::Expr::parse(std::to_string(bg[0]), 2));
      b.components.push_back(
          expr::Expr::parse(std::to_string(bg[1]), 2));
      f.background = std::make_shared<FieldDescriptor>(std::move(b));
    }
    return f;
  };

  m.v.push_back(blend2(p.clock1 * p.a1 * eye, p.clock2 * p.a2 * eye,
                       Eigen::Vector2d::Zero()));
  m.v.push_back(blend2(s1 * p.sigma1 * eye, s2 * p.sigma2 * eye,
                       Eigen::Vector2d(p.background, 0.0)));
  m.v.push_back(blend2(s1 * p.rho1 * rot90(), s2 * p.rho2 * rot90(),
                       Eigen::Vector2d(0.0, p.background)));

  m.v_tilde.push_back(FieldDescriptor::make_zero(2));
  for (int i = 0; i < 2; ++i) {
    FieldDescriptor f;
    f.kind = FieldDescriptor::Kind::Explicit;
    f.components.push_back(expr::Expr::parse(i == 0 ? "1" : "0", 2));
    f.components.push_back(expr::Expr::parse(i == 0 ? "0" : "1", 2));
    m.v_tilde.push_back(std::move(f));
  }
  m.confinement.radius = p.conf_radius;
  m.confinement.strength = p.conf_strength;
  return m;
}

inline ModelSpec model_c() {
  ModelAParams p;
  p.a = 0.5;        // repelling: gamma = -1
  p.sigma = 1.0;
  p.rho = 0.7;
  p.conf_radius = 1.5;
  p.conf_strength = 3.0;
  ModelSpec m = model_a(p);
  m.name = "model_c";
  return m;
}

// Point surface at the origin of R^3; v_i = sigma_i x + rho (e_i cross x).
// All q_i are constant, so beta/alpha is constant and gamma has the
// closed form -2 a0 / sum(sigma_i^2).
inline ModelSpec model_sphere3d(double a0 = -0.5, double sigma = 1.0,
                                double rho = 0.8) {
  ModelSpec m;
  m.dim = 3;
  m.name = "model_sphere3d";
  SurfaceSpec s;
  s.kind = SurfaceKind::Point;
  s.id = 0;
  s.location = Eigen::Vector3d::Zero();
  s.chart_radius = 1.0;
  m.surfaces.push_back(s);

  Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
  Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  auto cross_gen = [](int k) {
    Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
    int a = (k + 1) % 3, b = (k + 2) % 3;
    j(b, a) = 1;
    j(a, b) = -1;
    return j;  // j x = e_k cross x
  };
  m.v.push_back(FieldDescriptor::make_linear(a0 * eye, zero));
  double sigma_each = sigma / std::sqrt(3.0);  // sum sigma_i^2 = sigma^2
  for (int k = 0; k < 3; ++k)
    m.v.push_back(FieldDescriptor::make_linear(
        sigma_each * eye + rho * cross_gen(k), zero));
  m.confinement.radius = 3.0;
  m.confinement.strength = 2.0;
  return m;
}

// Circle of radius 1 in the xy-plane of R^3, explicit fields:
//   u_rad  = (|r|-1) rhat,  u_vert = x3 e3,  u_rot = (-x2, x1, 0),
//   u_twist = (|r|-1) e3 - x3 rhat.
// v_0 = a (u_rad + u_vert), v_1 = sigma (u_rad + u_vert),
// v_2 = rho u_rot, v_3 = tau u_twist. Constant beta/alpha again:
// gamma = -2a/sigma^2.
inline ModelSpec model_torus3d(double a = -0.5, double sigma = 1.0,
                               double rho = 0.8, double tau = 0.9) {
  ModelSpec m;
  m.dim = 3;
  m.name = "model_torus3d";
  SurfaceSpec s;
  s.kind = SurfaceKind::Circle;
  s.id = 0;
  s.center = Eigen::Vector3d::Zero();
  s.radius = 1.0;
  s.plane_u = Eigen::Vector3d::UnitX();
  s.plane_v = Eigen::Vector3d::UnitY();
  s.chart_radius = 0.6;
  m.surfaces.push_back(s);

  auto explicit_field = [&](double c, const char* e1, const char* e2,
                            const char* e3) {
    FieldDescriptor f;
    f.kind = FieldDescriptor::Kind::Explicit;
    auto scaled = [&](const char* e) {
      return expr::Expr::parse("(" + std::to_string(c) + ")*(" + e + ")", 3);
    };
    f.components.push_back(scaled(e1));
    f.components.push_back(scaled(e2));
    f.components.push_back(scaled(e3));
    return f;
  };
  const char* rad1 = "(sqrt(x1^2+x2^2)-1)*x1/sqrt(x1^2+x2^2)";
  const char* rad2 = "(sqrt(x1^2+x2^2)-1)*x2/sqrt(x1^2+x2^2)";
  m.v.push_back(explicit_field(a, rad1, rad2, "x3"));
  m.v.push_back(explicit_field(sigma, rad1, rad2, "x3"));
  m.v.push_back(explicit_field(rho, "-x2", "x1", "0"));
  {
    FieldDescriptor f;
    f.kind = FieldDescriptor::Kind::Explicit;
    auto scaled = [&](const std::string& e) {
      return expr::Expr::parse("(" + std::to_string(tau) + ")*(" + e + ")", 3);
    };
    f.components.push_back(scaled("-x3*x1/sqrt(x1^2+x2^2)"));
    f.components.push_back(scaled("-x3*x2/sqrt(x1^2+x2^2)"));
    f.components.push_back(scaled("sqrt(x1^2+x2^2)-1"));
    m.v.push_back(std::move(f));
  }
  m.confinement.radius = 3.0;
  m.confinement.strength = 2.0;
  return m;
}

}  // namespace metalab::testing
