#include "metalab/coeffs.hpp"

#include <cmath>
#include <limits>

#include "metalab/errors.hpp"

namespace metalab {

namespace {

constexpr double kJacobianStep = 1e-5;

double bump_f(double u) { return u > 0 ? std::exp(-1.0 / u) : 0.0; }

// Smooth transition: T(0) = 1, T(1) = 0, all derivatives vanish at the
// ends, so plateaued weights stay C^2 (in fact C-infinity) across the
// junctions.
double transition(double s) {
  double a = bump_f(s), b = bump_f(1.0 - s);
  return b / (a + b);
}

double transition_deriv(double s) {
  if (s <= 0 || s >= 1) return 0.0;
  double a = bump_f(s), b = bump_f(1.0 - s);
  double sum = a + b;
  return -a * b * (1.0 / (s * s) + 1.0 / ((1 - s) * (1 - s))) / (sum * sum);
}

}  // namespace

double blend_weight(double r, double r_inner, double r_outer) {
  if (r <= r_inner) return 1.0;
  if (r >= r_outer) return 0.0;
  return transition((r - r_inner) / (r_outer - r_inner));
}

double blend_weight_deriv(double r, double r_inner, double r_outer) {
  if (r <= r_inner || r >= r_outer) return 0.0;
  double span = r_outer - r_inner;
  return transition_deriv((r - r_inner) / span) / span;
}

// --- FieldDescriptor ----------------------------------------------------

FieldDescriptor FieldDescriptor::make_linear(const Eigen::MatrixXd& A,
                                             const Eigen::VectorXd& anchor) {
  FieldDescriptor f;
  f.kind = Kind::LinearAtPoint;
  f.linear.A = A;
  f.linear.anchor = anchor;
  return f;
}

FieldDescriptor FieldDescriptor::make_zero(int d) {
  return make_linear(Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d));
}

namespace {

void eval_linear_term(const LinearTerm& t, const double* x, double* out,
                      int d, bool accumulate) {
  double w = 1.0;
  if (std::isfinite(t.r_outer)) {
    double r2 = 0;
    for (int k = 0; k < d; ++k) {
      double dk = x[k] - t.anchor[k];
      r2 += dk * dk;
    }
    w = blend_weight(std::sqrt(r2), t.r_inner, t.r_outer);
  }
  for (int r = 0; r < d; ++r) {
    double acc = 0;
    for (int c = 0; c < d; ++c) acc += t.A(r, c) * (x[c] - t.anchor[c]);
    if (accumulate)
      out[r] += w * acc;
    else
      out[r] = w * acc;
  }
}

// J += w A + (A(x-p)) (dw/dr (x-p)/r)^T
void add_linear_term_jacobian(const LinearTerm& t, const double* x,
                              double* jac, int d) {
  double w = 1.0, dw = 0.0, r = 0.0;
  if (std::isfinite(t.r_outer)) {
    double r2 = 0;
    for (int k = 0; k < d; ++k) {
      double dk = x[k] - t.anchor[k];
      r2 += dk * dk;
    }
    r = std::sqrt(r2);
    w = blend_weight(r, t.r_inner, t.r_outer);
    dw = blend_weight_deriv(r, t.r_inner, t.r_outer);
  }
  for (int rr = 0; rr < d; ++rr)
    for (int cc = 0; cc < d; ++cc) jac[rr * d + cc] += w * t.A(rr, cc);
  if (dw != 0.0 && r > 0) {
    for (int rr = 0; rr < d; ++rr) {
      double ax = 0;
      for (int cc = 0; cc < d; ++cc) ax += t.A(rr, cc) * (x[cc] - t.anchor[cc]);
      for (int cc = 0; cc < d; ++cc)
        jac[rr * d + cc] += ax * dw * (x[cc] - t.anchor[cc]) / r;
    }
  }
}

}  // namespace

void FieldDescriptor::eval(const double* x, double* out, int d) const {
  switch (kind) {
    case Kind::LinearAtPoint:
      eval_linear_term(linear, x, out, d, false);
      return;
    case Kind::Blend: {
      for (int k = 0; k < d; ++k) out[k] = 0;
      double wsum = 0;
      for (const LinearTerm& t : terms) {
        eval_linear_term(t, x, out, d, true);
        double r2 = 0;
        for (int k = 0; k < d; ++k) {
          double dk = x[k] - t.anchor[k];
          r2 += dk * dk;
        }
        wsum += blend_weight(std::sqrt(r2), t.r_inner, t.r_outer);
      }
      if (background) {
        double bg[8];
        background->eval(x, bg, d);
        for (int k = 0; k < d; ++k) out[k] += (1.0 - wsum) * bg[k];
      }
      return;
    }
    case Kind::Explicit:
      for (int k = 0; k < d; ++k) out[k] = components[k].eval(x);
      return;
  }
}

void FieldDescriptor::jacobian(const double* x, double* jac, int d) const {
  for (int k = 0; k < d * d; ++k) jac[k] = 0;
  switch (kind) {
    case Kind::LinearAtPoint:
      add_linear_term_jacobian(linear, x, jac, d);
      return;
    case Kind::Blend: {
      double wsum = 0;
      double grad_wsum[8] = {0};
      for (const LinearTerm& t : terms) {
        add_linear_term_jacobian(t, x, jac, d);
        double r2 = 0;
        for (int k = 0; k < d; ++k) {
          double dk = x[k] - t.anchor[k];
          r2 += dk * dk;
        }
        double r = std::sqrt(r2);
        wsum += blend_weight(r, t.r_inner, t.r_outer);
        double dw = blend_weight_deriv(r, t.r_inner, t.r_outer);
        if (dw != 0.0 && r > 0)
          for (int k = 0; k < d; ++k)
            grad_wsum[k] += dw * (x[k] - t.anchor[k]) / r;
      }
      if (background) {
        double bj[64], bg[8];
        background->jacobian(x, bj, d);
        background->eval(x, bg, d);
        for (int rr = 0; rr < d; ++rr)
          for (int cc = 0; cc < d; ++cc)
            jac[rr * d + cc] +=
                (1.0 - wsum) * bj[rr * d + cc] - bg[rr] * grad_wsum[cc];
      }
      return;
    }
    case Kind::Explicit: {
      // 5-point central differences, step 1e-5.
      double xp[8];
      for (int k = 0; k < d; ++k) xp[k] = x[k];
      for (int c = 0; c < d; ++c) {
        double f[4][8];
        static constexpr double offs[4] = {-2, -1, 1, 2};
        for (int s = 0; s < 4; ++s) {
          xp[c] = x[c] + offs[s] * kJacobianStep;
          eval(xp, f[s], d);
        }
        xp[c] = x[c];
        for (int r = 0; r < d; ++r)
          jac[r * d + c] =
              (f[0][r] - 8 * f[1][r] + 8 * f[2][r] - f[3][r]) /
              (12 * kJacobianStep);
      }
      return;
    }
  }
}

void FieldDescriptor::validate(int d) const {
  if (d > 8) throw SchemaError("ambient dimension > 8 is not supported");
  auto check_term = [&](const LinearTerm& t, bool window_required) {
    if (t.A.rows() != d || t.A.cols() != d)
      throw SchemaError("field matrix must be d x d");
    if (t.anchor.size() != d) throw SchemaError("field anchor must be a d-vector");
    if (window_required && !std::isfinite(t.r_outer))
      throw SchemaError("blend terms need a finite outer radius");
    if (std::isfinite(t.r_outer) &&
        !(t.r_inner >= 0 && t.r_inner < t.r_outer))
      throw SchemaError("field window needs 0 <= inner < outer radius");
  };
  switch (kind) {
    case Kind::LinearAtPoint:
      check_term(linear, false);
      return;
    case Kind::Blend:
      if (terms.empty()) throw SchemaError("blend needs at least one term");
      for (const LinearTerm& t : terms) check_term(t, true);
      if (background) background->validate(d);
      return;
    case Kind::Explicit:
      if (static_cast<int>(components.size()) != d)
        throw SchemaError("explicit field needs d component expressions");
      return;
  }
}

// --- ModelSpec ----------------------------------------------------------

void ModelSpec::validate() const {
  if (dim < 2) throw SchemaError("model dimension must be at least 2");
  if (dim > 8) throw SchemaError("model dimension > 8 is not supported");
  if (surfaces.empty()) throw SchemaError("model needs at least one surface");
  for (int k = 0; k < static_cast<int>(surfaces.size()); ++k) {
    const SurfaceSpec& s = surfaces[k];
    if (s.id != k) throw SchemaError("surface ids must equal their index");
    if (s.dim() != dim) throw SchemaError("surface dimension mismatch");
    s.validate();
  }
  if (static_cast<int>(v.size()) != dim + 1)
    throw SchemaError("model needs d+1 unperturbed fields v_0..v_d");
  for (const FieldDescriptor& f : v) f.validate(dim);
  if (!v_tilde.empty()) {
    if (static_cast<int>(v_tilde.size()) != dim + 1)
      throw SchemaError("perturbation needs d+1 fields vt_0..vt_d");
    for (const FieldDescriptor& f : v_tilde) f.validate(dim);
  }
  if (confinement.radius < 0 || confinement.strength < 0)
    throw SchemaError("confinement parameters must be nonnegative");
}

void ModelSpec::add_confinement_drift(const double* x, double* out) const {
  if (!confinement.active()) return;
  double r2 = 0;
  for (int k = 0; k < dim; ++k) r2 += x[k] * x[k];
  double s = std::sqrt(r2) / confinement.radius;
  if (s <= 0.5) return;
  double ramp = s >= 1.0 ? 1.0 : 1.0 - transition(2.0 * (s - 0.5));
  for (int k = 0; k < dim; ++k) out[k] -= confinement.strength * ramp * x[k];
}

void ModelSpec::eval_v(int i, const double* x, double* out) const {
  v[i].eval(x, out, dim);
}

void ModelSpec::eval_vt(int i, const double* x, double* out) const {
  v_tilde[i].eval(x, out, dim);
}

void ModelSpec::drift(const double* x, double eps, double* out) const {
  v[0].eval(x, out, dim);
  if (eps > 0 && has_perturbation()) {
    double tmp[8];
    v_tilde[0].eval(x, tmp, dim);
    for (int k = 0; k < dim; ++k) out[k] += eps * eps * tmp[k];
  }
  add_confinement_drift(x, out);
}

// --- Assumption checks ----------------------------------------------------

namespace {

double halton(long index, int base) {
  double f = 1.0, r = 0.0;
  long i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

Eigen::VectorXd halton_point(long index, int d, double box) {
  static constexpr int bases[8] = {2, 3, 5, 7, 11, 13, 17, 19};
  Eigen::VectorXd x(d);
  for (int k = 0; k < d; ++k)
    x[k] = (2.0 * halton(index + 1, bases[k]) - 1.0) * box;
  return x;
}

double surface_extent(const ModelSpec& model) {
  double ext = 0;
  for (const SurfaceSpec& s : model.surfaces) {
    if (s.kind == SurfaceKind::Point)
      ext = std::max(ext, s.location.norm());
    else
      ext = std::max(ext, s.center.norm() + s.radius);
  }
  return ext;
}

}  // namespace

bool AssumptionReport::all_pass() const {
  for (const Item& it : items)
    if (!it.pass) return false;
  return true;
}

const AssumptionReport::Item* AssumptionReport::find(
    const std::string& name) const {
  for (const Item& it : items)
    if (it.name == name) return &it;
  return nullptr;
}

AssumptionReport check_assumptions(const ModelSpec& model,
                                   const CheckOptions& opt) {
  AssumptionReport rep;
  const int d = model.dim;
  double box = opt.sample_box > 0
                   ? opt.sample_box
                   : (model.confinement.active() ? 1.2 * model.confinement.radius
                                                 : surface_extent(model) + 2.0);

  // (a) invariance: v_i vanishes on point surfaces, is tangent on circles.
  {
    AssumptionReport::Item it;
    it.name = "a_invariance";
    it.pass = true;
    double tmp[8];
    for (const SurfaceSpec& s : model.surfaces) {
      int n_pts = s.kind == SurfaceKind::Point ? 1 : 64;
      for (int p = 0; p < n_pts; ++p) {
        Eigen::VectorXd m = s.kind == SurfaceKind::Point
                                ? s.location
                                : s.circle_point(p * 2.0 * M_PI / n_pts);
        for (int i = 0; i <= d; ++i) {
          model.eval_v(i, m.data(), tmp);
          Eigen::Map<Eigen::VectorXd> vi(tmp, d);
          double off;
          if (s.kind == SurfaceKind::Point) {
            off = vi.norm();
          } else {
            Eigen::VectorXd t = s.circle_tangent(p * 2.0 * M_PI / n_pts);
            off = (vi - vi.dot(t) * t).norm();
          }
          if (off > it.worst) {
            it.worst = off;
            it.witness = m;
          }
        }
      }
    }
    it.pass = it.worst <= opt.invariance_tol;
    rep.items.push_back(std::move(it));
  }

  // (b) span of v_1..v_d on D; (c) span of vt_1..vt_d everywhere.
  auto span_check = [&](const std::vector<FieldDescriptor>& fields,
                        const char* name) {
    AssumptionReport::Item it;
    it.name = name;
    if (fields.empty()) {
      it.pass = false;
      it.note = "no perturbation fields in the model";
      rep.items.push_back(std::move(it));
      return;
    }
    it.worst = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cols(d, d);
    double tmp[8];
    for (long n = 0; n < opt.n_samples; ++n) {
      Eigen::VectorXd x = halton_point(n, d, box);
      for (int i = 1; i <= d; ++i) {
        fields[i].eval(x.data(), tmp, d);
        for (int r = 0; r < d; ++r) cols(r, i - 1) = tmp[r];
      }
      double smin = cols.jacobiSvd().singularValues().minCoeff();
      if (smin < it.worst) {
        it.worst = smin;
        it.witness = x;
      }
    }
    it.pass = it.worst > opt.span_threshold;
    rep.items.push_back(std::move(it));
  };
  span_check(model.v, "b_span");
  span_check(model.v_tilde, "c_perturbation_span");

  // (d) inward drift on the confinement sphere.
  {
    AssumptionReport::Item it;
    it.name = "d_confinement";
    double radius = model.confinement.active() ? model.confinement.radius
                                               : surface_extent(model) + 2.0;
    it.worst = -std::numeric_limits<double>::infinity();
    double tmp[8];
    long n_sphere = 64L * d;
    for (long n = 0; n < n_sphere; ++n) {
      Eigen::VectorXd x = halton_point(n, d, 1.0);
      if (x.norm() < 1e-6) continue;
      x *= radius / x.norm();
      model.drift(x.data(), 0.0, tmp);
      double val = Eigen::Map<Eigen::VectorXd>(tmp, d).dot(x);
      if (val > it.worst) {
        it.worst = val;
        it.witness = x;
      }
    }
    it.pass = it.worst < 0;
    if (!model.confinement.active()) it.note = "no confinement configured";
    rep.items.push_back(std::move(it));
  }

  // (e) ellipticity of L_y on each surface, plus the alpha positivity flag.
  {
    AssumptionReport::Item ell, alp;
    ell.name = "e_ellipticity";
    alp.name = "alpha_positivity";
    ell.pass = alp.pass = true;
    ell.worst = alp.worst = std::numeric_limits<double>::infinity();
    for (const SurfaceSpec& s : model.surfaces) {
      try {
        SGrid grid = make_grid(s, opt.grid_n);
        LinearizationData lin = linearize(
            model, s.id, s.kind == SurfaceKind::Circle ? grid.n0 : 1);
        SCoefficients co = assemble_coeffs(lin, grid, false);
        ell.worst = std::min(ell.worst, co.min_ellipticity);
        alp.worst = std::min(alp.worst, co.min_alpha);
      } catch (const Error& e) {
        ell.pass = false;
        ell.note = std::string("surface ") + std::to_string(s.id) + ": " +
                   e.what();
      }
    }
    if (ell.pass) ell.pass = ell.worst > 1e-12;
    alp.pass = alp.worst >= 1e-12;
    rep.items.push_back(std::move(ell));
    rep.items.push_back(std::move(alp));
  }

  return rep;
}

// --- Linearization --------------------------------------------------------

LinearizationData::LinearizationData(const ModelSpec& model, int surface_id,
                                     int n_m)
    : model_(&model),
      surface_(&model.surfaces[surface_id]),
      surface_id_(surface_id),
      codim_(surface_->codim()),
      n_m_(surface_->kind == SurfaceKind::Point ? 1 : n_m) {
  int nf = n_fields();
  m_cache_.resize(static_cast<std::size_t>(n_m_) * nf);
  tang_cache_.resize(static_cast<std::size_t>(n_m_) * nf);
  for (int node = 0; node < n_m_; ++node) {
    double angle = node * 2.0 * M_PI / n_m_;
    for (int i = 0; i < nf; ++i) {
      m_cache_[node * nf + i] = normal_block_at(angle, i);
      tang_cache_[node * nf + i] = tangential_speed_at(angle, i);
    }
  }
}

Eigen::MatrixXd LinearizationData::normal_block_at(double m_angle,
                                                   int field) const {
  const int d = model_->dim;
  double jac[64];
  if (surface_->kind == SurfaceKind::Point) {
    model_->v[field].jacobian(surface_->location.data(), jac, d);
    return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                    Eigen::RowMajor>>(jac, d, d);
  }
  Eigen::VectorXd m = surface_->circle_point(m_angle);
  model_->v[field].jacobian(m.data(), jac, d);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
      J(jac, d, d);
  Eigen::MatrixXd frame(d, 2);
  frame.col(0) =
      std::cos(m_angle) * surface_->plane_u + std::sin(m_angle) * surface_->plane_v;
  frame.col(1) = surface_->axis();
  return frame.transpose() * J * frame;
}

double LinearizationData::tangential_speed_at(double m_angle,
                                              int field) const {
  if (surface_->kind == SurfaceKind::Point) return 0.0;
  Eigen::VectorXd m = surface_->circle_point(m_angle);
  double tmp[8];
  model_->v[field].eval(m.data(), tmp, model_->dim);
  Eigen::VectorXd t = surface_->circle_tangent(m_angle);
  return Eigen::Map<Eigen::VectorXd>(tmp, model_->dim).dot(t) /
         surface_->radius;
}

LinearizationData linearize(const ModelSpec& model, int surface_id, int n_m) {
  if (surface_id < 0 || surface_id >= static_cast<int>(model.surfaces.size()))
    throw SchemaError("surface id out of range");
  const SurfaceSpec& s = model.surfaces[surface_id];
  // Invariance must hold before the normal blocks mean anything.
  const int d = model.dim;
  double tmp[8];
  int n_pts = s.kind == SurfaceKind::Point ? 1 : 64;
  for (int p = 0; p < n_pts; ++p) {
    double angle = p * 2.0 * M_PI / n_pts;
    Eigen::VectorXd m =
        s.kind == SurfaceKind::Point ? s.location : s.circle_point(angle);
    for (int i = 0; i <= d; ++i) {
      model.eval_v(i, m.data(), tmp);
      Eigen::Map<Eigen::VectorXd> vi(tmp, d);
      double off = s.kind == SurfaceKind::Point
                       ? vi.norm()
                       : (vi - vi.dot(s.circle_tangent(angle)) *
                                   s.circle_tangent(angle))
                             .norm();
      if (off > 1e-10)
        throw NonInvariantField(
            "field v_" + std::to_string(i) + " does not leave surface " +
            std::to_string(surface_id) + " invariant (residual " +
            std::to_string(off) + ")");
    }
  }
  return LinearizationData(model, surface_id, n_m);
}

// --- Coefficient assembly --------------------------------------------------

namespace {

constexpr double kParamStep = 1e-5;

// Chart state at one set of angular parameters: q_i and the chart
// components of w_i for every field.
struct ChartPoint {
  std::vector<double> q;                    // <M_i n, n>
  std::vector<std::array<double, 2>> u;     // chart components of w_i
};

class ChartEvaluator {
 public:
  ChartEvaluator(const LinearizationData& lin, const SGrid& grid)
      : lin_(lin), grid_(grid), nf_(lin.n_fields()) {}

  int n_coord() const { return grid_.two_dim() ? 2 : 1; }

  void eval(double t0, double t1, ChartPoint& out) const {
    out.q.assign(nf_, 0.0);
    out.u.assign(nf_, {0.0, 0.0});
    switch (grid_.topology) {
      case GridTopology::Circle: {
        Eigen::Vector2d n(std::cos(t0), std::sin(t0));
        Eigen::Vector2d e(-std::sin(t0), std::cos(t0));
        for (int i = 0; i < nf_; ++i) {
          const Eigen::MatrixXd& M = lin_.M(0, i);
          Eigen::Vector2d Mn = M * n;
          out.q[i] = n.dot(Mn);
          out.u[i][0] = e.dot(Mn);
        }
        return;
      }
      case GridTopology::Sphere: {
        double st = std::sin(t0), ct = std::cos(t0);
        double sp = std::sin(t1), cp = std::cos(t1);
        Eigen::Vector3d n(st * cp, st * sp, ct);
        Eigen::Vector3d eth(ct * cp, ct * sp, -st);
        Eigen::Vector3d eph(-sp, cp, 0.0);
        for (int i = 0; i < nf_; ++i) {
          const Eigen::MatrixXd& M = lin_.M(0, i);
          Eigen::Vector3d Mn = M * n;
          double q = n.dot(Mn);
          Eigen::Vector3d s = Mn - q * n;
          out.q[i] = q;
          out.u[i][0] = s.dot(eth);
          out.u[i][1] = s.dot(eph) / st;
        }
        return;
      }
      case GridTopology::Torus: {
        Eigen::Vector2d n(std::cos(t1), std::sin(t1));
        Eigen::Vector2d e(-std::sin(t1), std::cos(t1));
        for (int i = 0; i < nf_; ++i) {
          Eigen::MatrixXd M = lin_.normal_block_at(t0, i);
          Eigen::Vector2d Mn = M * n;
          out.q[i] = n.dot(Mn);
          out.u[i][0] = lin_.tangential_speed_at(t0, i);
          out.u[i][1] = e.dot(Mn);
        }
        return;
      }
    }
  }

  // Directional derivative of q_i along w_i, evaluated via the matrix
  // form of the quadratic-form derivative (plus a parameter derivative
  // of M_i along the m-circle for torus charts).
  double directional_q_derivative(double t0, double t1, int i,
                                  const ChartPoint& at) const {
    switch (grid_.topology) {
      case GridTopology::Circle: {
        Eigen::Vector2d n(std::cos(t0), std::sin(t0));
        Eigen::Vector2d e(-std::sin(t0), std::cos(t0));
        const Eigen::MatrixXd& M = lin_.M(0, i);
        Eigen::Vector2d sym = (M + M.transpose()) * n;
        return at.u[i][0] * sym.dot(e);
      }
      case GridTopology::Sphere: {
        double st = std::sin(t0), ct = std::cos(t0);
        double sp = std::sin(t1), cp = std::cos(t1);
        Eigen::Vector3d n(st * cp, st * sp, ct);
        const Eigen::MatrixXd& M = lin_.M(0, i);
        Eigen::Vector3d Mn = M * n;
        Eigen::Vector3d s = Mn - at.q[i] * n;
        return ((M + M.transpose()) * n).dot(s);
      }
      case GridTopology::Torus: {
        Eigen::Vector2d n(std::cos(t1), std::sin(t1));
        Eigen::MatrixXd M = lin_.normal_block_at(t0, i);
        Eigen::Vector2d Mn = M * n;
        Eigen::Vector2d s = Mn - at.q[i] * n;
        double within_plane = ((M + M.transpose()) * n).dot(s);
        // m-derivative of M_i, 5-point central in the angle parameter.
        Eigen::MatrixXd Mm2 = lin_.normal_block_at(t0 - 2 * kParamStep, i);
        Eigen::MatrixXd Mm1 = lin_.normal_block_at(t0 - kParamStep, i);
        Eigen::MatrixXd Mp1 = lin_.normal_block_at(t0 + kParamStep, i);
        Eigen::MatrixXd Mp2 = lin_.normal_block_at(t0 + 2 * kParamStep, i);
        Eigen::MatrixXd dM =
            (Mm2 - 8 * Mm1 + 8 * Mp1 - Mp2) / (12 * kParamStep);
        return within_plane + at.u[i][0] * n.dot(dM * n);
      }
    }
    return 0.0;
  }

 private:
  const LinearizationData& lin_;
  const SGrid& grid_;
  int nf_;
};

}  // namespace

SCoefficients assemble_coeffs(const LinearizationData& lin, const SGrid& grid,
                              bool throw_on_failure) {
  const SurfaceSpec& s = lin.surface();
  bool topo_ok =
      (grid.topology == GridTopology::Circle && s.kind == SurfaceKind::Point &&
       s.dim() == 2) ||
      (grid.topology == GridTopology::Sphere && s.kind == SurfaceKind::Point &&
       s.dim() == 3) ||
      (grid.topology == GridTopology::Torus && s.kind == SurfaceKind::Circle);
  if (!topo_ok) throw SchemaError("grid topology does not match the surface");
  if (grid.topology == GridTopology::Torus && grid.n0 != lin.n_m())
    throw SchemaError("torus grid resolution must match the m-node count");

  ChartEvaluator chart(lin, grid);
  const int nf = lin.n_fields();
  const int nc = chart.n_coord();
  const int n = grid.size();

  SCoefficients co;
  co.surface_id = lin.surface_id();
  co.grid = grid;
  co.alpha.resize(n);
  co.beta.resize(n);
  co.a0.resize(n);
  co.b0.resize(n);
  co.c0.resize(n);
  if (nc == 2) {
    co.a1.resize(n);
    co.a01.resize(n);
    co.b1.resize(n);
    co.c1.resize(n);
  }
  co.min_alpha = std::numeric_limits<double>::infinity();
  co.min_ellipticity = std::numeric_limits<double>::infinity();

  ChartPoint center, shift[2][4];
  static constexpr double offs[4] = {-2, -1, 1, 2};

  for (int i = 0; i < grid.n0; ++i) {
    for (int j = 0; j < grid.n1; ++j) {
      int k = grid.index(i, j);
      double t0 = grid.coord0(i);
      double t1 = grid.coord1(j);
      chart.eval(t0, t1, center);

      // Parameter derivatives of the chart components of w_i.
      for (int a = 0; a < nc; ++a)
        for (int sft = 0; sft < 4; ++sft)
          chart.eval(t0 + (a == 0 ? offs[sft] * kParamStep : 0.0),
                     t1 + (a == 1 ? offs[sft] * kParamStep : 0.0),
                     shift[a][sft]);
      auto du = [&](int field, int comp, int along) {
        return (shift[along][0].u[field][comp] -
                8 * shift[along][1].u[field][comp] +
                8 * shift[along][2].u[field][comp] -
                shift[along][3].u[field][comp]) /
               (12 * kParamStep);
      };

      double alpha = 0, beta = center.q[0];
      double A[2][2] = {{0, 0}, {0, 0}};
      double B[2] = {center.u[0][0], center.u[0][1]};
      double C[2] = {0, 0};
      for (int f = 1; f < nf; ++f) {
        double q = center.q[f];
        alpha += 0.5 * q * q;
        beta += 0.5 * (chart.directional_q_derivative(t0, t1, f, center) +
                       q * q);
        for (int a = 0; a < nc; ++a) {
          C[a] += q * center.u[f][a];
          for (int b = 0; b < nc; ++b)
            A[a][b] += 0.5 * center.u[f][a] * center.u[f][b];
          for (int b = 0; b < nc; ++b)
            B[a] += 0.5 * center.u[f][b] * du(f, a, b);
        }
      }

      co.alpha[k] = alpha;
      co.beta[k] = beta;
      co.a0[k] = A[0][0];
      co.b0[k] = B[0];
      co.c0[k] = C[0];
      if (nc == 2) {
        co.a1[k] = A[1][1];
        co.a01[k] = A[0][1];
        co.b1[k] = B[1];
        co.c1[k] = C[1];
      }

      co.min_alpha = std::min(co.min_alpha, alpha);
      double ell;
      if (nc == 1) {
        ell = A[0][0];
      } else {
        double tr = A[0][0] + A[1][1];
        double det = A[0][0] * A[1][1] - A[0][1] * A[0][1];
        ell = 0.5 * (tr - std::sqrt(std::max(tr * tr - 4 * det, 0.0)));
      }
      co.min_ellipticity = std::min(co.min_ellipticity, ell);
    }
  }

  co.alpha_flagged = co.min_alpha < 1e-12;
  if (throw_on_failure && co.min_ellipticity <= 0)
    throw EllipticityFailure("L_y degenerates on the grid (min ellipticity " +
                             std::to_string(co.min_ellipticity) + ")");
  return co;
}

}  // namespace metalab
