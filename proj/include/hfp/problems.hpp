#pragma once

// Benchmark instances whose limit is known in closed form.

#include "hfp/engine.hpp"
#include "hfp/random.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace hfp {

namespace solution {

/// The common solution set is {p}.
struct Singleton {
  Vector p;
};

/// The limit is x_star; `feasible` draws points of the solution set.
struct Analytic {
  Vector x_star;
  std::function<std::vector<Vector>(int, std::uint64_t)> feasible;
};

struct Unknown {};

}  // namespace solution

using Solution = std::variant<solution::Singleton, solution::Analytic, solution::Unknown>;

struct Problem {
  std::string name;
  SchemeConfig cfg;
  Schedule sch;
  Vector x1;
  Solution solution = solution::Unknown{};
  /// Generator matrices, kept for inspection and determinism checks.
  std::vector<LinearMap> matrices;

  bool has_solution() const { return !std::holds_alternative<solution::Unknown>(solution); }

  /// Points of the solution set, for hvi_gap.
  std::vector<Vector> feasible_samples(int n, std::uint64_t seed = 7) const {
    if (auto* s = std::get_if<solution::Singleton>(&solution)) return {s->p};
    if (auto* a = std::get_if<solution::Analytic>(&solution)) return a->feasible(n, seed);
    throw Error("feasible_samples: solution set unknown for " + name);
  }
};

inline Vector oracle_solution(const Problem& prob) {
  if (auto* s = std::get_if<solution::Singleton>(&prob.solution)) return s->p;
  if (auto* a = std::get_if<solution::Analytic>(&prob.solution)) return a->x_star;
  throw Error("oracle_solution: solution unknown for " + prob.name);
}

/// True when p and p +- delta*e_i all lie in C.
inline bool strictly_inside(const ConvexSet& c, const Vector& p, double delta = 1e-9) {
  if (!c.contains(p, 0.0)) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Vector q = p;
    q[i] += delta;
    if (!c.contains(q, 0.0)) return false;
    q[i] = p[i] - delta;
    if (!c.contains(q, 0.0)) return false;
  }
  return true;
}

namespace detail {

inline constexpr int kCertSamples = 200;
inline constexpr double kCertTol = 1e-9;

/// Random symmetric PSD matrix R R^T + shift*I scaled to spectral norm `scale`.
inline LinearMap random_psd(Rng& rng, Eigen::Index dim, double shift, double scale) {
  const LinearMap r = rng.normal_matrix(dim, dim);
  LinearMap m = r * r.transpose();
  m.diagonal().array() += shift;
  m = 0.5 * (m + m.transpose());
  const Vector ev = symmetric_eigenvalues(m);
  return m * (scale / ev(ev.size() - 1));
}

/// Gate applied by every generator before it returns.
inline void verify_problem(const Problem& prob) {
  const ValidationReport vr = validate_config(prob.cfg);
  if (!vr.passed()) throw Error(prob.name + ": configuration check failed: " + vr.failures().front());
  const ScheduleReport sr = validate_schedule_for(prob.cfg, prob.sch, prob.x1);
  if (!sr.passed()) throw Error(prob.name + ": schedule check failed: " + sr.failures().front());
  const Sampler sampler = Sampler::around(prob.cfg.C);
  for (const CertifiedOperator* op : {&prob.cfg.A, &prob.cfg.B, &prob.cfg.S, &prob.cfg.V, &prob.cfg.F})
    for (const auto& rep : certify_all(*op, sampler, kCertSamples, kCertTol))
      if (!rep.passed) throw Error(prob.name + ": certification failed: " + rep.check);
  const auto near = near_nonexpansive_check(prob.cfg.T, 5, sampler, 50, kCertTol);
  if (!near.passed) throw Error(prob.name + ": iterate oracle is not nearly nonexpansive");
  if (auto* s = std::get_if<solution::Singleton>(&prob.solution)) {
    const auto res = residual_bundle(prob.cfg, s->p, ResidualProbes::defaults(prob.sch));
    if (res.composite() > 1e-8) throw Error(prob.name + ": residuals at p exceed 1e-8");
  }
}

inline Vector sample_start(Rng& rng, const ConvexSet& c) {
  const auto b = c.bounds();
  if (!b) throw Error("benchmark sets must be bounded");
  return c.project(rng.uniform_in_box(b->lo, b->hi));
}

/// Shared singleton construction; T is supplied by the caller.
inline Problem singleton_base(std::uint64_t seed, const ConvexSet& c, const Vector& p, std::string name) {
  const Eigen::Index dim = c.dim();
  if (p.size() != dim) throw DimensionError(name.c_str(), dim, p.size());
  if (!c.is_bounded()) throw Error(name + ": C must be bounded");
  if (!strictly_inside(c, p)) throw Error(name + ": p must lie strictly inside C");

  Rng rng(seed);
  const LinearMap m_b = random_psd(rng, dim, 0.0, 1.0);
  const LinearMap m_g = random_psd(rng, dim, 0.1, 0.5);

  Problem prob;
  prob.name = std::move(name);
  prob.matrices = {m_b, m_g};
  SchemeConfig& cfg = prob.cfg;
  cfg.C = c;
  cfg.A = CertifiedOperator::translation_to_point(p).with_name("A");
  const double ism_b = derive_ism_from_psd(m_b);
  cfg.B = CertifiedOperator(
      "B", dim, [m_b, p](const Vector& x) -> Vector { return m_b * (x - p); },
      {cert::Ism{ism_b}, cert::Lipschitz{1.0 / ism_b}, cert::StronglyMonotone{0.0}});
  const double lg = symmetric_eigenvalues(m_g)(dim - 1);
  cfg.G = Bifunction::linear(CertifiedOperator(
      "g", dim, [m_g, p](const Vector& x) -> Vector { return m_g * (x - p); },
      {cert::Lipschitz{lg}, cert::StronglyMonotone{symmetric_eigenvalues(m_g)(0)}}));
  cfg.phi = ConvexFn::zero();
  cfg.S = CertifiedOperator::identity(dim).with_name("S");
  cfg.F = CertifiedOperator::identity(dim).with_name("F");
  cfg.V = CertifiedOperator::zero(dim).with_name("V");
  cfg.strengths = StrengthParams{1.0, 0.0, 0.0, 1.0, 1.0};
  cfg.variant = Variant::Full;
  prob.sch = Schedule::canonical(cfg.A.ism_modulus().value(), ism_b);
  prob.x1 = sample_start(rng, c);
  prob.solution = solution::Singleton{p};
  return prob;
}

}  // namespace detail

/// Instance whose common solution set is {p}: T contracts toward p with factor
/// 1/2, A(x) = x - p, B(x) = M_B(x - p), G(z,y) = <M_G(z - p), y - z>,
/// phi = 0, S = F = I, V = 0, mu = 1, rho = 0.
inline Problem make_singleton(std::uint64_t seed, const ConvexSet& c, const Vector& p) {
  Problem prob = detail::singleton_base(seed, c, p, "singleton");
  const Eigen::Index dim = c.dim();
  const CertifiedOperator t("T", dim, [p](const Vector& x) -> Vector { return p + 0.5 * (x - p); },
                            {cert::Lipschitz{0.5}, cert::Nonexpansive{}});
  prob.cfg.T = IterateOracle::composed(t);
  detail::verify_problem(prob);
  return prob;
}

/// Singleton instance whose T is a directly specified iterate family
///   T^n x = P_C(p + 2^-n (x - p) + (a_n / 2) sin(20 (x_0 - p_0)) e_0),
/// a_n = 1/(n+1)^2. T^1 is not nonexpansive, yet |T^n x - T^n y| <= |x - y| + a_n.
inline Problem make_near_singleton(std::uint64_t seed, const ConvexSet& c, const Vector& p) {
  Problem prob = detail::singleton_base(seed, c, p, "near_singleton");
  const Eigen::Index dim = c.dim();
  auto a = [](int n) { return 1.0 / ((n + 1.0) * (n + 1.0)); };
  prob.cfg.T = IterateOracle::family(
      "near_family", dim,
      [p, c, a](int n, const Vector& x) -> Vector {
        Vector y = p + std::ldexp(1.0, -std::min(n, 1000)) * (x - p);
        y[0] += 0.5 * a(n) * std::sin(20.0 * (x[0] - p[0]));
        return c.project(y);
      },
      a);
  prob.sch.a = SeqDesc::power_law(1.0, 2.0, 1.0);
  detail::verify_problem(prob);
  return prob;
}

/// Hierarchical selection over C: T = I, A = B = 0, G = phi = 0, S = F = I,
/// V = v constant, mu = 1. Every point of C is a common solution and the
/// selected limit is x* = P_C(rho v).
inline Problem make_selection(const ConvexSet& c, const Vector& v, double rho, std::optional<Vector> x1 = {}) {
  const Eigen::Index dim = c.dim();
  if (v.size() != dim) throw DimensionError("make_selection", dim, v.size());
  if (!c.is_bounded()) throw Error("make_selection: C must be bounded");

  Problem prob;
  prob.name = "selection";
  SchemeConfig& cfg = prob.cfg;
  cfg.C = c;
  cfg.A = CertifiedOperator::zero(dim).with_name("A");
  cfg.B = CertifiedOperator::zero(dim).with_name("B");
  cfg.S = CertifiedOperator::identity(dim).with_name("S");
  cfg.F = CertifiedOperator::identity(dim).with_name("F");
  cfg.V = CertifiedOperator::constant(v).with_name("V");
  cfg.T = IterateOracle::identity(dim);
  cfg.strengths = StrengthParams{1.0, rho, 0.0, 1.0, 1.0};
  prob.sch = Schedule::canonical(cfg.A.ism_modulus().value(), cfg.B.ism_modulus().value());
  prob.x1 = x1 ? *x1 : c.project(Vector::Zero(dim));
  const auto box = *c.bounds();
  prob.solution = solution::Analytic{
      c.project(rho * v), [c, box](int n, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<Vector> pts;
        for (int i = 0; i < n; ++i) pts.push_back(c.project(rng.uniform_in_box(box.lo, box.hi)));
        return pts;
      }};
  detail::verify_problem(prob);
  return prob;
}

/// Configuration on which the full scheme collapses to x' = P_C[alpha rho V x +
/// (I - alpha mu F) T x]: A = B = 0, G = phi = 0, S = I, beta = 0, and T the
/// projection onto a ball inside C (so T^n = T). F is affine with a symmetric
/// positive definite matrix and V a scaled rotation.
inline Problem make_ceng_fixture() {
  const Eigen::Index dim = 2;
  Problem prob;
  prob.name = "ceng_fixture";
  SchemeConfig& cfg = prob.cfg;
  cfg.C = ConvexSet::box(dim, -2.0, 2.0);
  const ConvexSet d = ConvexSet::ball(make_vector({0.5, 0.2}), 0.6);
  cfg.T = IterateOracle::stationary(
      CertifiedOperator("P_D", dim, [d](const Vector& x) -> Vector { return d.project(x); }, {cert::Nonexpansive{}}));
  LinearMap fm(2, 2);
  fm << 2.0, 0.5, 0.5, 1.0;
  cfg.F = CertifiedOperator::affine(fm, make_vector({-1.0, 0.5})).with_name("F");
  LinearMap rot(2, 2);
  rot << 0.0, -0.3, 0.3, 0.0;
  cfg.V = CertifiedOperator::linear(rot).with_name("V");
  cfg.A = CertifiedOperator::zero(dim).with_name("A");
  cfg.B = CertifiedOperator::zero(dim).with_name("B");
  cfg.S = CertifiedOperator::identity(dim).with_name("S");
  const Vector ev = symmetric_eigenvalues(fm);
  cfg.strengths = StrengthParams{0.2, 0.1, 0.3, ev(0), ev(1)};
  prob.sch = Schedule::canonical(cfg.A.ism_modulus().value(), cfg.B.ism_modulus().value());
  prob.sch.beta = SeqDesc::constant(0.0);
  prob.x1 = make_vector({1.5, -1.8});
  detail::verify_problem(prob);
  return prob;
}

}  // namespace hfp
