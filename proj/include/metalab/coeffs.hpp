#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "metalab/expr.hpp"
#include "metalab/geometry.hpp"
#include "metalab/grid.hpp"

namespace metalab {

// --- Field descriptors ------------------------------------------------

// A(x - p), optionally windowed: full strength inside r_inner, smoothly
// cut to zero at r_outer. Infinite radii mean a globally linear field.
struct LinearTerm {
  Eigen::MatrixXd A;
  Eigen::VectorXd anchor;
  double r_inner = std::numeric_limits<double>::infinity();
  double r_outer = std::numeric_limits<double>::infinity();
};

class FieldDescriptor {
 public:
  enum class Kind { LinearAtPoint, Blend, Explicit };

  Kind kind = Kind::LinearAtPoint;
  LinearTerm linear;                    // LinearAtPoint
  std::vector<LinearTerm> terms;        // Blend
  std::shared_ptr<const FieldDescriptor> background;  // Blend, may be null
  std::vector<expr::Expr> components;   // Explicit

  static FieldDescriptor make_linear(const Eigen::MatrixXd& A,
                                     const Eigen::VectorXd& anchor);
  static FieldDescriptor make_zero(int d);

  void eval(const double* x, double* out, int d) const;
  // Row-major d x d Jacobian; analytic for LinearAtPoint and Blend,
  // 5-point central differences (h = 1e-5) for Explicit.
  void jacobian(const double* x, double* jac, int d) const;

  void validate(int d) const;
};

// C^2 transition weight: 1 for r <= r_inner, 0 for r >= r_outer.
double blend_weight(double r, double r_inner, double r_outer);
double blend_weight_deriv(double r, double r_inner, double r_outer);

// --- Model ------------------------------------------------------------

struct Confinement {
  double radius = 0.0;
  double strength = 0.0;
  bool active() const { return radius > 0 && strength > 0; }
};

struct ModelSpec {
  int dim = 0;
  std::vector<SurfaceSpec> surfaces;
  std::vector<FieldDescriptor> v;        // v_0..v_d
  std::vector<FieldDescriptor> v_tilde;  // empty, or vt_0..vt_d
  Confinement confinement;
  std::string name;

  bool has_perturbation() const { return !v_tilde.empty(); }
  void validate() const;

  // -strength * x * ramp(|x|/radius), ramp C^2, 0 below radius/2 and 1
  // from radius on; added into out.
  void add_confinement_drift(const double* x, double* out) const;

  void eval_v(int i, const double* x, double* out) const;
  void eval_vt(int i, const double* x, double* out) const;
  // v_0 + eps^2 vt_0 + confinement
  void drift(const double* x, double eps, double* out) const;
};

// --- Assumption checks --------------------------------------------------

struct CheckOptions {
  int n_samples = 1000;
  double span_threshold = 1e-6;
  double invariance_tol = 1e-10;
  double sample_box = 0.0;  // 0: derived from confinement / surfaces
  int grid_n = 32;
};

struct AssumptionReport {
  struct Item {
    std::string name;
    bool pass = false;
    double worst = 0.0;
    Eigen::VectorXd witness;
    std::string note;
  };
  std::vector<Item> items;
  bool all_pass() const;
  const Item* find(const std::string& name) const;
};

AssumptionReport check_assumptions(const ModelSpec& model,
                                   const CheckOptions& opt = {});

// --- Linearization at a surface -----------------------------------------

// Normal-block Jacobians M_i(m) and tangential speeds of the fields at a
// surface, with continuous off-node queries for parameter derivatives.
class LinearizationData {
 public:
  LinearizationData(const ModelSpec& model, int surface_id, int n_m);

  int surface_id() const { return surface_id_; }
  int codim() const { return codim_; }
  int n_fields() const { return model_->dim + 1; }
  int n_m() const { return n_m_; }
  const SurfaceSpec& surface() const { return *surface_; }

  // Cached values at m-node `node` (points have a single node).
  const Eigen::MatrixXd& M(int node, int field) const {
    return m_cache_[node * n_fields() + field];
  }
  double tangential(int node, int field) const {
    return tang_cache_[node * n_fields() + field];
  }

  // Continuous queries; `m_angle` ignored for point surfaces.
  Eigen::MatrixXd normal_block_at(double m_angle, int field) const;
  double tangential_speed_at(double m_angle, int field) const;

 private:
  const ModelSpec* model_;
  const SurfaceSpec* surface_;
  int surface_id_;
  int codim_;
  int n_m_;
  std::vector<Eigen::MatrixXd> m_cache_;
  std::vector<double> tang_cache_;
};

// Throws NonInvariantField if the surface-invariance check fails.
LinearizationData linearize(const ModelSpec& model, int surface_id,
                            int n_m = 1);

// --- Local coefficients on S --------------------------------------------

struct SCoefficients {
  int surface_id = 0;
  SGrid grid;
  // Radial coefficients of Lemma-2.1 form.
  std::vector<double> alpha, beta;
  // L_y in chart coordinates: sum_ab A_ab d_ab + sum_a B_a d_a.
  std::vector<double> a0, a1, a01;  // a1, a01 empty for 1-d grids
  std::vector<double> b0, b1;
  // Coefficient field of D_y (gamma-dependent drift).
  std::vector<double> c0, c1;

  double min_alpha = 0.0;
  bool alpha_flagged = false;  // min alpha < 1e-12
  double min_ellipticity = 0.0;
};

// Throws EllipticityFailure when L_y degenerates on the grid (unless
// throw_on_failure is false, for reporting paths).
SCoefficients assemble_coeffs(const LinearizationData& lin, const SGrid& grid,
                              bool throw_on_failure = true);

}  // namespace metalab
