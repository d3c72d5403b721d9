#pragma once

// Operators with declared strength constants, sample-based certification of
// those constants, and the strength algebra used by the iteration's step
// (the nu coefficient of I - lambda*mu*F and the monotonicity of mu*F - rho*V).

#include "hfp/core.hpp"
#include "hfp/random.hpp"
#include "hfp/sets.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hfp {

using Map = std::function<Vector(const Vector&)>;

namespace cert {

/// <Fx - Fy, x - y> >= modulus * |Fx - Fy|^2. An infinite modulus is only
/// satisfiable by constant maps.
struct Ism {
  double modulus;
};

struct Lipschitz {
  double L;
};

struct StronglyMonotone {
  double eta;
};

struct Nonexpansive {};

}  // namespace cert

using Certificate = std::variant<cert::Ism, cert::Lipschitz, cert::StronglyMonotone, cert::Nonexpansive>;

inline std::string describe(const Certificate& c) {
  return std::visit(
      [](const auto& x) -> std::string {
        using C = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<C, cert::Ism>) return "ism(" + std::to_string(x.modulus) + ")";
        else if constexpr (std::is_same_v<C, cert::Lipschitz>) return "lipschitz(" + std::to_string(x.L) + ")";
        else if constexpr (std::is_same_v<C, cert::StronglyMonotone>) return "strongly_monotone(" + std::to_string(x.eta) + ")";
        else return "nonexpansive";
      },
      c);
}

/// A vector-to-vector map bundled with the strength constants downstream
/// validation relies on.
class CertifiedOperator {
 public:
  CertifiedOperator() = default;
  CertifiedOperator(std::string name, Eigen::Index dim, Map eval, std::vector<Certificate> certs,
                    bool is_zero = false)
      : name_(std::move(name)), dim_(dim), eval_(std::move(eval)), certs_(std::move(certs)), zero_(is_zero) {}

  static CertifiedOperator zero(Eigen::Index dim) {
    return {"zero", dim, [dim](const Vector&) -> Vector { return Vector::Zero(dim); },
            {cert::Ism{std::numeric_limits<double>::infinity()}, cert::Lipschitz{0.0},
             cert::StronglyMonotone{0.0}, cert::Nonexpansive{}},
            true};
  }

  static CertifiedOperator identity(Eigen::Index dim) {
    return {"identity", dim, [](const Vector& x) -> Vector { return x; },
            {cert::Ism{1.0}, cert::Lipschitz{1.0}, cert::StronglyMonotone{1.0}, cert::Nonexpansive{}}};
  }

  /// x -> c*x with c > 0.
  static CertifiedOperator scaled_identity(Eigen::Index dim, double c) {
    if (!(c > 0.0)) throw Error("scaled_identity: factor must be positive");
    std::vector<Certificate> certs{cert::Ism{1.0 / c}, cert::Lipschitz{c}, cert::StronglyMonotone{c}};
    if (c <= 1.0) certs.emplace_back(cert::Nonexpansive{});
    return {"scaled_identity", dim, [c](const Vector& x) -> Vector { return c * x; }, std::move(certs)};
  }

  /// x -> x - p.
  static CertifiedOperator translation_to_point(Vector p) {
    const Eigen::Index dim = p.size();
    return {"translation_to_point", dim, [p = std::move(p)](const Vector& x) -> Vector { return x - p; },
            {cert::Ism{1.0}, cert::Lipschitz{1.0}, cert::StronglyMonotone{1.0}, cert::Nonexpansive{}}};
  }

  /// x -> v.
  static CertifiedOperator constant(Vector v) {
    const Eigen::Index dim = v.size();
    return {"constant", dim, [v = std::move(v)](const Vector&) -> Vector { return v; },
            {cert::Ism{std::numeric_limits<double>::infinity()}, cert::Lipschitz{0.0}, cert::StronglyMonotone{0.0},
             cert::Nonexpansive{}}};
  }

  /// x -> M*x + b. Constants are computed from M: the spectral norm always,
  /// and for symmetric M also the ism modulus (when PSD) and the
  /// strong-monotonicity modulus (when the smallest eigenvalue is >= 0).
  static CertifiedOperator affine(LinearMap m, Vector b);

  static CertifiedOperator linear(LinearMap m) {
    const Eigen::Index dim = m.rows();
    return affine(std::move(m), Vector::Zero(dim));
  }

  Vector operator()(const Vector& x) const {
    if (x.size() != dim_) throw DimensionError(name_.c_str(), dim_, x.size());
    return eval_(x);
  }

  const std::string& name() const { return name_; }
  Eigen::Index dim() const { return dim_; }
  const std::vector<Certificate>& certificates() const { return certs_; }
  const Map& map() const { return eval_; }
  bool is_zero() const { return zero_; }

  std::optional<double> ism_modulus() const { return find<cert::Ism>([](auto c) { return c.modulus; }); }
  std::optional<double> lipschitz() const {
    if (auto l = find<cert::Lipschitz>([](auto c) { return c.L; })) return l;
    if (nonexpansive()) return 1.0;
    return std::nullopt;
  }
  std::optional<double> strong_monotonicity() const {
    return find<cert::StronglyMonotone>([](auto c) { return c.eta; });
  }
  bool nonexpansive() const {
    for (const auto& c : certs_) {
      if (std::holds_alternative<cert::Nonexpansive>(c)) return true;
      if (auto* l = std::get_if<cert::Lipschitz>(&c); l && l->L <= 1.0) return true;
    }
    return false;
  }

  CertifiedOperator with_name(std::string n) const {
    CertifiedOperator out = *this;
    out.name_ = std::move(n);
    return out;
  }

 private:
  template <class C, class Get>
  std::optional<double> find(Get get) const {
    for (const auto& c : certs_)
      if (auto* p = std::get_if<C>(&c)) return get(*p);
    return std::nullopt;
  }

  std::string name_ = "unnamed";
  Eigen::Index dim_ = 0;
  Map eval_;
  std::vector<Certificate> certs_;
  bool zero_ = false;
};

inline CertifiedOperator CertifiedOperator::affine(LinearMap m, Vector b) {
  if (m.rows() != m.cols()) throw DimensionError("affine", m.rows(), m.cols());
  if (m.rows() != b.size()) throw DimensionError("affine", m.rows(), b.size());
  if (!m.allFinite() || !b.allFinite()) throw Error("affine: entries must be finite");
  const Eigen::Index dim = m.rows();
  const double spectral = Eigen::JacobiSVD<LinearMap>(m).singularValues()(0);
  std::vector<Certificate> certs{cert::Lipschitz{spectral}};
  if (spectral <= 1.0) certs.emplace_back(cert::Nonexpansive{});
  if (is_symmetric(m)) {
    const Vector ev = symmetric_eigenvalues(0.5 * (m + m.transpose()));
    const double lo = ev(0);
    const double hi = ev(ev.size() - 1);
    const double slack = 1e-12 * std::max(1.0, std::abs(hi));
    if (lo >= -slack) {
      certs.emplace_back(cert::StronglyMonotone{std::max(0.0, lo)});
      certs.emplace_back(cert::Ism{hi > 0.0 ? 1.0 / hi : std::numeric_limits<double>::infinity()});
    }
  }
  bool zero = m.isZero(0.0) && b.isZero(0.0);
  return {"affine", dim, [m = std::move(m), b = std::move(b)](const Vector& x) -> Vector { return m * x + b; },
          std::move(certs), zero};
}

/// x -> x - step * op(x).
inline CertifiedOperator forward_step(const CertifiedOperator& op, double step) {
  Map f = op.map();
  return {"I-" + std::to_string(step) + "*" + op.name(), op.dim(),
          [f, step](const Vector& x) -> Vector { return x - step * f(x); }, {}};
}

/// ism modulus 1/lambda_max(M) of x -> M*x for symmetric PSD M != 0.
inline double derive_ism_from_psd(const LinearMap& m) {
  if (m.rows() != m.cols()) throw DimensionError("derive_ism_from_psd", m.rows(), m.cols());
  if (!is_symmetric(m)) throw Error("derive_ism_from_psd: matrix is not symmetric");
  const Vector ev = symmetric_eigenvalues(m);
  const double hi = ev(ev.size() - 1);
  if (!(hi > 0.0)) throw Error("derive_ism_from_psd: matrix is zero or negative semidefinite");
  if (ev(0) < -1e-12 * hi) throw Error("derive_ism_from_psd: matrix is indefinite");
  return 1.0 / hi;
}

// ---------------------------------------------------------------------------
// Nearly nonexpansive iterate families.

using PowerMap = std::function<Vector(int, const Vector&)>;
using NearSequence = std::function<double(int)>;

/// Engine-facing view of T: the scheme only ever asks for T^n at step n.
class IterateOracle {
 public:
  IterateOracle() = default;
  IterateOracle(std::string name, Eigen::Index dim, PowerMap power, NearSequence near, bool stationary)
      : name_(std::move(name)), dim_(dim), power_(std::move(power)), near_(std::move(near)),
        stationary_(stationary) {}

  /// T^n by composing a self-map n times; a_n given (default 0).
  static IterateOracle composed(const CertifiedOperator& t, NearSequence near = {}) {
    Map f = t.map();
    if (!near) near = [](int) { return 0.0; };
    return {"composed(" + t.name() + ")", t.dim(),
            [f](int n, const Vector& x) -> Vector {
              Vector y = x;
              for (int k = 0; k < n; ++k) y = f(y);
              return y;
            },
            std::move(near), false};
  }

  /// For idempotent T (projections, the identity): T^n = T for every n >= 1.
  static IterateOracle stationary(const CertifiedOperator& t) {
    Map f = t.map();
    return {"stationary(" + t.name() + ")", t.dim(), [f](int, const Vector& x) -> Vector { return f(x); },
            [](int) { return 0.0; }, true};
  }

  static IterateOracle identity(Eigen::Index dim) { return stationary(CertifiedOperator::identity(dim)); }

  /// Directly supplied iterate family with declared {a_n}.
  static IterateOracle family(std::string name, Eigen::Index dim, PowerMap power, NearSequence near) {
    return {std::move(name), dim, std::move(power), std::move(near), false};
  }

  Vector power(int n, const Vector& x) const {
    if (n < 1) throw Error("IterateOracle::power: n must be >= 1");
    if (x.size() != dim_) throw DimensionError("IterateOracle::power", dim_, x.size());
    return power_(n, x);
  }
  double near(int n) const { return near_(n); }
  bool is_stationary() const { return stationary_; }
  const std::string& name() const { return name_; }
  Eigen::Index dim() const { return dim_; }

  /// T is assumed demicontinuous; there is no numerical test for it.
  bool declared_demicontinuous = true;

 private:
  std::string name_ = "unnamed";
  Eigen::Index dim_ = 0;
  PowerMap power_;
  NearSequence near_;
  bool stationary_ = false;
};

// ---------------------------------------------------------------------------
// Strength parameters.

class StrengthError : public Error {
 public:
  using Error::Error;
};

/// nu = 1 - sqrt(1 - mu*(2*eta - mu*L^2)), the contraction margin of
/// I - lambda*mu*F: |g(x) - g(y)| <= (1 - lambda*nu)|x - y|.
inline double nu_coefficient(double mu, double eta, double L) {
  if (!(eta > 0.0)) throw StrengthError("nu_coefficient: eta must be positive");
  if (!(L > 0.0)) throw StrengthError("nu_coefficient: L must be positive");
  const double upper = 2.0 * eta / (L * L);
  if (!(mu > 0.0 && mu < upper))
    throw StrengthError("nu_coefficient: mu must lie in (0, 2*eta/L^2) = (0, " + std::to_string(upper) + ")");
  const double radicand = 1.0 - mu * (2.0 * eta - mu * L * L);
  if (radicand < -1e-15) throw StrengthError("nu_coefficient: inconsistent constants (L < eta)");
  return 1.0 - std::sqrt(std::max(0.0, radicand));
}

struct StrengthParams {
  double mu = 1.0;
  double rho = 0.0;
  double gamma = 0.0;  // Lipschitz constant of V
  double eta = 1.0;    // strong monotonicity of F
  double L = 1.0;      // Lipschitz constant of F

  double nu() const { return nu_coefficient(mu, eta, L); }
};

struct CheckEntry {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckEntry> entries;
  std::optional<double> nu;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  const CheckEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (!e.passed) out.push_back(e.name);
    return out;
  }
};

inline ValidationReport validate_strengths(const StrengthParams& p) {
  ValidationReport r;
  r.entries.push_back({"eta_positive", p.eta > 0.0, "eta = " + std::to_string(p.eta)});
  r.entries.push_back({"L_positive", p.L > 0.0, "L = " + std::to_string(p.L)});
  const bool mu_ok = p.eta > 0.0 && p.L > 0.0 && p.mu > 0.0 && p.mu < 2.0 * p.eta / (p.L * p.L);
  r.entries.push_back({"mu_bound", mu_ok, "0 < mu < 2*eta/L^2 with mu = " + std::to_string(p.mu)});
  r.entries.push_back({"rho_gamma_nonnegative", p.rho * p.gamma >= 0.0 && p.gamma >= 0.0,
                       "rho*gamma = " + std::to_string(p.rho * p.gamma)});
  if (mu_ok) {
    try {
      r.nu = p.nu();
      r.entries.push_back({"rho_gamma_below_nu", p.rho * p.gamma < *r.nu,
                           "rho*gamma = " + std::to_string(p.rho * p.gamma) + ", nu = " + std::to_string(*r.nu)});
    } catch (const StrengthError& e) {
      r.entries.push_back({"rho_gamma_below_nu", false, e.what()});
    }
  } else {
    r.entries.push_back({"rho_gamma_below_nu", false, "nu undefined"});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sampling-based certification.

/// Uniform pairs in a box, seeded deterministically.
struct Sampler {
  BoundingBox box;
  std::uint64_t seed = 0;

  /// Bounding box of C inflated by 50%; [-1.5, 1.5]^d when C is unbounded.
  static Sampler around(const ConvexSet& c, std::uint64_t seed = 20240101) {
    auto b = c.bounds();
    if (!b) b = BoundingBox{Vector::Constant(c.dim(), -1.0), Vector::Constant(c.dim(), 1.0)};
    return {b->inflated(1.5), seed};
  }

  std::vector<std::pair<Vector, Vector>> pairs(int n) const {
    Rng rng(seed);
    std::vector<std::pair<Vector, Vector>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Vector x = rng.uniform_in_box(box.lo, box.hi);
      Vector y = rng.uniform_in_box(box.lo, box.hi);
      out.emplace_back(std::move(x), std::move(y));
    }
    return out;
  }

  std::vector<Vector> points(int n) const {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Vector> out;
    for (int i = 0; i < n; ++i) out.push_back(rng.uniform_in_box(box.lo, box.hi));
    return out;
  }
};

struct CertReport {
  std::string check;
  bool passed = true;
  /// Largest value of (required - achieved) over the samples; <= tol passes.
  double worst_violation = -std::numeric_limits<double>::infinity();
  int samples = 0;
  std::optional<std::pair<Vector, Vector>> worst_pair;
  double coefficient = 0.0;

  void record(double violation, const Vector& x, const Vector& y) {
    ++samples;
    if (violation > worst_violation || !worst_pair) {
      worst_violation = std::max(worst_violation, violation);
      worst_pair = std::make_pair(x, y);
    }
  }
  void finish(double tol) {
    if (samples == 0) worst_violation = 0.0;
    passed = std::isfinite(worst_violation) ? worst_violation <= tol : worst_violation < 0.0;
  }
};

namespace detail {

inline double certificate_violation(const Certificate& c, const Vector& x, const Vector& y, const Vector& fx,
                                    const Vector& fy) {
  const Vector df = fx - fy;
  const Vector dx = x - y;
  return std::visit(
      [&](const auto& k) -> double {
        using C = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<C, cert::Ism>) {
          const double sq = df.squaredNorm();
          const double need = sq == 0.0 ? 0.0 : k.modulus * sq;
          return need - df.dot(dx);
        } else if constexpr (std::is_same_v<C, cert::Lipschitz>) {
          return df.norm() - k.L * dx.norm();
        } else if constexpr (std::is_same_v<C, cert::StronglyMonotone>) {
          return k.eta * dx.squaredNorm() - df.dot(dx);
        } else {
          return df.norm() - dx.norm();
        }
      },
      c);
}

}  // namespace detail

inline CertReport certify(const CertifiedOperator& op, const Certificate& c, const Sampler& sampler, int n_samples,
                          double tol) {
  if (n_samples < 1) throw Error("certify: n_samples must be >= 1");
  CertReport rep;
  rep.check = op.name() + ":" + describe(c);
  for (const auto& [x, y] : sampler.pairs(n_samples))
    rep.record(detail::certificate_violation(c, x, y, op(x), op(y)), x, y);
  rep.finish(tol);
  return rep;
}

/// Certifies every declared certificate of op.
inline std::vector<CertReport> certify_all(const CertifiedOperator& op, const Sampler& sampler, int n_samples,
                                           double tol) {
  std::vector<CertReport> out;
  for (const auto& c : op.certificates()) out.push_back(certify(op, c, sampler, n_samples, tol));
  return out;
}

/// <(mu F - rho V)x - (mu F - rho V)y, x - y> >= (mu*eta - rho*gamma)|x - y|^2.
inline CertReport composite_strong_monotonicity_check(const CertifiedOperator& f, const CertifiedOperator& v,
                                                      const StrengthParams& p, const Sampler& sampler,
                                                      int n_samples, double tol) {
  CertReport rep;
  rep.check = "composite_strong_monotonicity";
  rep.coefficient = p.mu * p.eta - p.rho * p.gamma;
  for (const auto& [x, y] : sampler.pairs(n_samples)) {
    const Vector gx = p.mu * f(x) - p.rho * v(x);
    const Vector gy = p.mu * f(y) - p.rho * v(y);
    const Vector dx = x - y;
    rep.record(rep.coefficient * dx.squaredNorm() - (gx - gy).dot(dx), x, y);
  }
  rep.finish(tol);
  return rep;
}

/// |(I - lambda*mu*F)x - (I - lambda*mu*F)y| <= (1 - lambda*nu)|x - y|.
inline CertReport contraction_factor_check(const CertifiedOperator& f, double lambda, const StrengthParams& p,
                                           const Sampler& sampler, int n_samples, double tol) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error("contraction_factor_check: lambda must lie in (0, 1)");
  CertReport rep;
  rep.check = "contraction_factor";
  rep.coefficient = 1.0 - lambda * p.nu();
  for (const auto& [x, y] : sampler.pairs(n_samples)) {
    const Vector gx = x - lambda * p.mu * f(x);
    const Vector gy = y - lambda * p.mu * f(y);
    rep.record((gx - gy).norm() - rep.coefficient * (x - y).norm(), x, y);
  }
  rep.finish(tol);
  return rep;
}

/// |T^n x - T^n y| <= |x - y| + a_n for n = 1..max_power.
inline CertReport near_nonexpansive_check(const IterateOracle& t, int max_power, const Sampler& sampler,
                                          int n_samples, double tol) {
  CertReport rep;
  rep.check = "nearly_nonexpansive(" + t.name() + ")";
  const auto pairs = sampler.pairs(n_samples);
  for (int n = 1; n <= max_power; ++n)
    for (const auto& [x, y] : pairs)
      rep.record((t.power(n, x) - t.power(n, y)).norm() - (x - y).norm() - t.near(n), x, y);
  rep.finish(tol);
  return rep;
}

}  // namespace hfp
