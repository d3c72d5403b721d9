#pragma once

// Bifunctions G, convex functions phi and the resolvent T_r:
//
//   T_r(x) = { z in C : G(z,y) + phi(y) - phi(z) + (1/r)<y - z, z - x> >= 0  for all y in C }.
//
// T_r is computed by the frozen-argument proximal fixed point
//   z_{k+1} = argmin_{y in C} G(z_k, y) + phi(y) + (1/2r)|y - x|^2,
// which contracts with factor r*Lip(g) when G(z,y) = <g(z), y - z>. When that
// factor is not safely below 1 the projected forward iteration on the strongly
// monotone map z -> grad_y G(z,z) + grad phi(z) + (z - x)/r is used instead.

#include "hfp/core.hpp"
#include "hfp/ops.hpp"
#include "hfp/sets.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hfp {

class ResolventError : public Error {
 public:
  using Error::Error;
};

/// User-supplied bifunction. (A1)-(A4) cannot be verified symbolically, so the
/// caller declares them and supplies probe points for violation checks.
struct CustomBifunction {
  std::function<double(const Vector&, const Vector&)> value;
  /// Gradient of y -> G(z, y), which must be convex and smooth in y.
  std::function<Vector(const Vector&, const Vector&)> grad_y;
  /// Lipschitz constant of y -> grad_y(z, y).
  double grad_lipschitz = 0.0;
  /// Lipschitz constant of z -> grad_y(z, y); governs the outer contraction.
  double coupling_lipschitz = 0.0;
  bool declared_a1_a4 = false;
  std::vector<Vector> probe_grid;
};

class Bifunction {
 public:
  enum class Kind { Zero, LinearRepresentable, Custom };

  static Bifunction zero() { return Bifunction(Kind::Zero); }

  /// G(z, y) = <g(z), y - z> with g monotone.
  static Bifunction linear(CertifiedOperator g) {
    if (!g.lipschitz()) throw Error("Bifunction::linear: g must carry a Lipschitz certificate");
    Bifunction b(Kind::LinearRepresentable);
    b.g_ = std::make_shared<CertifiedOperator>(std::move(g));
    return b;
  }

  static Bifunction custom(CustomBifunction c) {
    if (!c.value || !c.grad_y) throw Error("Bifunction::custom: value and grad_y are required");
    Bifunction b(Kind::Custom);
    b.custom_ = std::make_shared<CustomBifunction>(std::move(c));
    return b;
  }

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  const CertifiedOperator& g() const { return *g_; }
  const CustomBifunction& custom_spec() const { return *custom_; }

  double operator()(const Vector& z, const Vector& y) const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::LinearRepresentable:
        return (*g_)(z).dot(y - z);
      case Kind::Custom:
        return custom_->value(z, y);
    }
    return 0.0;
  }

  /// Gradient in y at (z, y).
  Vector grad_y(const Vector& z, const Vector& y) const {
    switch (kind_) {
      case Kind::Zero:
        return Vector::Zero(y.size());
      case Kind::LinearRepresentable:
        return (*g_)(z);
      case Kind::Custom:
        return custom_->grad_y(z, y);
    }
    return Vector::Zero(y.size());
  }

  /// Lipschitz constant of z -> grad_y(z, .), the frozen-iteration coupling.
  double coupling_lipschitz() const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::LinearRepresentable:
        return *g_->lipschitz();
      case Kind::Custom:
        return custom_->coupling_lipschitz;
    }
    return 0.0;
  }

  /// Largest violation of G(x,x) = 0 and G(x,y) + G(y,x) <= 0 on the points.
  double sampled_a1_a2_violation(const std::vector<Vector>& pts) const {
    double worst = 0.0;
    for (const auto& x : pts) {
      worst = std::max(worst, std::abs((*this)(x, x)));
      for (const auto& y : pts) worst = std::max(worst, (*this)(x, y) + (*this)(y, x));
    }
    return worst;
  }

 private:
  explicit Bifunction(Kind k) : kind_(k) {}

  Kind kind_;
  std::shared_ptr<const CertifiedOperator> g_;
  std::shared_ptr<const CustomBifunction> custom_;
};

/// phi(y) = 0 or phi(y) = 0.5 <Qy, y> + <q, y> with Q symmetric PSD.
class ConvexFn {
 public:
  static ConvexFn zero() { return ConvexFn(); }

  static ConvexFn quadratic(LinearMap q_mat, Vector q_vec) {
    if (q_mat.rows() != q_mat.cols()) throw DimensionError("ConvexFn::quadratic", q_mat.rows(), q_mat.cols());
    if (q_mat.rows() != q_vec.size()) throw DimensionError("ConvexFn::quadratic", q_mat.rows(), q_vec.size());
    if (!is_symmetric(q_mat)) throw Error("ConvexFn::quadratic: Q must be symmetric");
    const Vector ev = symmetric_eigenvalues(q_mat);
    const double hi = ev(ev.size() - 1);
    if (ev(0) < -1e-12 * std::max(1.0, std::abs(hi))) throw Error("ConvexFn::quadratic: Q must be PSD");
    ConvexFn f;
    f.quad_ = true;
    f.Q_ = std::move(q_mat);
    f.q_ = std::move(q_vec);
    f.lambda_max_ = std::max(0.0, hi);
    f.lambda_min_ = std::max(0.0, ev(0));
    return f;
  }

  bool is_zero() const { return !quad_; }
  const LinearMap& Q() const { return Q_; }
  const Vector& q() const { return q_; }
  double lambda_max() const { return lambda_max_; }
  double lambda_min() const { return lambda_min_; }

  double operator()(const Vector& y) const {
    if (!quad_) return 0.0;
    return 0.5 * y.dot(Q_ * y) + q_.dot(y);
  }

  Vector gradient(const Vector& y) const {
    if (!quad_) return Vector::Zero(y.size());
    return Q_ * y + q_;
  }

 private:
  bool quad_ = false;
  LinearMap Q_;
  Vector q_;
  double lambda_max_ = 0.0;
  double lambda_min_ = 0.0;
};

enum class InnerMethod {
  Auto,              // frozen argument when r*Lip(g) < 0.9, projected forward otherwise
  FrozenArgument,    // z <- argmin_y G(z,y) + phi(y) + |y - x|^2 / 2r
  ProjectedForward,  // z <- P_C(z - tau (grad_y G(z,z) + grad phi(z) + (z - x)/r))
};

struct InnerOptions {
  double tol = 1e-11;
  int max_iters = 10000;
  InnerMethod method = InnerMethod::Auto;
};

struct ResolventSpec {
  Bifunction G = Bifunction::zero();
  ConvexFn phi = ConvexFn::zero();
  ConvexSet C = ConvexSet::whole_space(1);
  double r = 1.0;
  InnerOptions inner{};
  /// Existence condition (B1) is existential; it can only be declared.
  bool declared_b1 = false;

  /// (B2) holds, or (B1) has been declared.
  bool existence_condition() const { return declared_b1 || C.is_bounded(); }
};

namespace detail {

inline constexpr double kMaxInnerContraction = 0.9;

/// argmin_{y in C} phi(y) + <lin, y> + (1/2r)|y - x|^2.
inline Vector prox_subproblem(const ConvexFn& phi, const ConvexSet& c, double r, const Vector& x,
                              const Vector& lin, const Vector& warm, const InnerOptions& opt) {
  if (phi.is_zero()) return c.project(x - r * lin);
  const Vector target = x / r - lin - phi.q();
  if (std::holds_alternative<set_kind::Primitive>(c.storage()) &&
      std::holds_alternative<set_kind::WholeSpace>(std::get<set_kind::Primitive>(c.storage()))) {
    LinearMap h = phi.Q();
    h.diagonal().array() += 1.0 / r;
    return h.ldlt().solve(target);
  }
  // Projected gradient on a strongly convex quadratic.
  const double step = 1.0 / (phi.lambda_max() + 1.0 / r);
  Vector y = c.project(warm);
  for (int k = 0; k < opt.max_iters; ++k) {
    const Vector grad = phi.Q() * y + (y / r) - target;
    Vector next = c.project(y - step * grad);
    const double change = (next - y).norm();
    y = std::move(next);
    if (change <= 0.1 * opt.tol) return y;
  }
  throw ResolventError("resolvent: projected-gradient subproblem exceeded " + std::to_string(opt.max_iters) +
                       " iterations");
}

/// argmin_{y in C} G(z, y) + phi(y) + (1/2r)|y - x|^2 for a custom G.
inline Vector custom_subproblem(const Bifunction& g, const ConvexFn& phi, const ConvexSet& c, double r,
                                const Vector& x, const Vector& z, const InnerOptions& opt) {
  const double step = 1.0 / (g.custom_spec().grad_lipschitz + phi.lambda_max() + 1.0 / r);
  Vector y = c.project(z);
  for (int k = 0; k < opt.max_iters; ++k) {
    const Vector grad = g.grad_y(z, y) + phi.gradient(y) + (y - x) / r;
    Vector next = c.project(y - step * grad);
    const double change = (next - y).norm();
    y = std::move(next);
    if (change <= 0.1 * opt.tol) return y;
  }
  throw ResolventError("resolvent: custom subproblem exceeded " + std::to_string(opt.max_iters) + " iterations");
}

}  // namespace detail

inline double inner_contraction_factor(const ResolventSpec& spec) { return spec.r * spec.G.coupling_lipschitz(); }

inline bool uses_frozen_argument(const ResolventSpec& spec) {
  switch (spec.inner.method) {
    case InnerMethod::FrozenArgument: return true;
    case InnerMethod::ProjectedForward: return false;
    case InnerMethod::Auto: return inner_contraction_factor(spec) < detail::kMaxInnerContraction;
  }
  return true;
}

inline void validate_resolvent_spec(const ResolventSpec& spec) {
  if (!(spec.r > 0.0) || !std::isfinite(spec.r)) throw ResolventError("resolvent: r must be positive");
  if (spec.G.kind() == Bifunction::Kind::Custom && !spec.G.custom_spec().declared_a1_a4)
    throw ResolventError("resolvent: custom bifunction must declare (A1)-(A4)");
  const double factor = inner_contraction_factor(spec);
  if (spec.G.kind() != Bifunction::Kind::Zero && spec.inner.method == InnerMethod::FrozenArgument &&
      factor >= detail::kMaxInnerContraction)
    throw ResolventError("resolvent: inner contraction factor r*Lip(g) = " + std::to_string(factor) +
                         " is not below " + std::to_string(detail::kMaxInnerContraction));
}

namespace detail {

inline Vector resolvent_forward(const ResolventSpec& spec, const Vector& x) {
  const double lg = spec.G.coupling_lipschitz() +
                    (spec.G.kind() == Bifunction::Kind::Custom ? spec.G.custom_spec().grad_lipschitz : 0.0);
  const double m = 1.0 / spec.r + spec.phi.lambda_min();
  const double lip = lg + spec.phi.lambda_max() + 1.0 / spec.r;
  const double tau = m / (lip * lip);
  const double q = std::sqrt(std::max(0.0, 1.0 - (m * m) / (lip * lip)));
  Vector z = spec.C.project(x);
  for (int k = 0; k < spec.inner.max_iters; ++k) {
    const Vector h = spec.G.grad_y(z, z) + spec.phi.gradient(z) + (z - x) / spec.r;
    Vector next = spec.C.project(z - tau * h);
    const double change = (next - z).norm();
    z = std::move(next);
    if (!z.allFinite()) throw ResolventError("resolvent: non-finite inner iterate");
    if (change <= spec.inner.tol * (1.0 - q)) return z;
  }
  throw ResolventError("resolvent: projected forward iteration exceeded " + std::to_string(spec.inner.max_iters) +
                       " iterations (contraction factor " + std::to_string(q) + ")");
}

}  // namespace detail

/// T_r(x). Deterministic: repeated calls return bitwise-identical results.
inline Vector resolvent(const ResolventSpec& spec, const Vector& x) {
  validate_resolvent_spec(spec);
  if (x.size() != spec.C.dim()) throw DimensionError("resolvent", spec.C.dim(), x.size());
  const Vector zero = Vector::Zero(x.size());
  if (spec.G.is_zero()) return detail::prox_subproblem(spec.phi, spec.C, spec.r, x, zero, x, spec.inner);
  if (!uses_frozen_argument(spec)) return detail::resolvent_forward(spec, x);

  Vector z = spec.C.project(x);
  for (int k = 0; k < spec.inner.max_iters; ++k) {
    Vector next = spec.G.kind() == Bifunction::Kind::Custom
                      ? detail::custom_subproblem(spec.G, spec.phi, spec.C, spec.r, x, z, spec.inner)
                      : detail::prox_subproblem(spec.phi, spec.C, spec.r, x, spec.G.grad_y(z, z), z, spec.inner);
    const double change = (next - z).norm();
    z = std::move(next);
    if (!z.allFinite()) throw ResolventError("resolvent: non-finite inner iterate");
    if (change <= spec.inner.tol) return z;
  }
  throw ResolventError("resolvent: inner iteration exceeded " + std::to_string(spec.inner.max_iters) +
                       " iterations (contraction factor r*Lip(g) = " +
                       std::to_string(inner_contraction_factor(spec)) + ")");
}

/// Left-hand side of the defining inequality of T_r at (x, z, y).
inline double resolvent_inequality(const ResolventSpec& spec, const Vector& x, const Vector& z, const Vector& y) {
  return spec.G(z, y) + spec.phi(y) - spec.phi(z) + (y - z).dot(z - x) / spec.r;
}

/// max over probes of the negative part of the defining inequality.
inline double resolvent_violation(const ResolventSpec& spec, const Vector& x, const Vector& z,
                                  const std::vector<Vector>& probe_ys, double membership_tol = 1e-8) {
  double worst = 0.0;
  for (const auto& y : probe_ys) {
    if (!spec.C.contains(y, membership_tol)) throw Error("resolvent_violation: probe point outside C");
    worst = std::max(worst, -resolvent_inequality(spec, x, z, y));
  }
  return worst;
}

/// |x - T_r(x - r*Bx)|; zero iff x solves the generalized mixed equilibrium
/// problem for (G, phi, B) up to the inner tolerance.
inline double gmep_residual(const Bifunction& g, const ConvexFn& phi, const CertifiedOperator& b, const ConvexSet& c,
                            double r_probe, const Vector& x, InnerOptions inner = {}) {
  const double theta = b.ism_modulus().value_or(0.0);
  if (!(r_probe > 0.0 && r_probe < 2.0 * theta))
    throw Error("gmep_residual: r_probe must lie in (0, 2*ism(B))");
  ResolventSpec spec{g, phi, c, r_probe, inner};
  return (x - resolvent(spec, x - r_probe * b(x))).norm();
}

}  // namespace hfp
