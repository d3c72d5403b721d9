#pragma once

// The explicit projection iteration
//
//   u_n     = T_{r_n}(x_n - r_n B x_n)
//   z_n     = P_C(u_n - lambda_n A u_n)
//   y_n     = P_C[beta_n S x_n + (1 - beta_n) z_n]
//   x_{n+1} = P_C[alpha_n rho V x_n + (I - alpha_n mu F) T^n y_n]
//
// together with its reduced forms, control-sequence validation, residual
// diagnostics and trace export.

#include "hfp/core.hpp"
#include "hfp/eq.hpp"
#include "hfp/ops.hpp"
#include "hfp/sets.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace hfp {

enum class Variant {
  Full,  // all four stages
  S1,    // no z-stage: y = P_C[beta S x + (1 - beta) u]
  S2,    // no S or z stage: x' = P_C[alpha rho V x + (I - alpha mu F) T^n u]
  S3,    // as S1, with B absent from the resolvent inequality
  Ceng,  // x' = P_C[alpha rho V x + (I - alpha mu F) T x] with stationary T
};

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::S1: return "s1";
    case Variant::S2: return "s2";
    case Variant::S3: return "s3";
    case Variant::Ceng: return "ceng";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  for (Variant v : {Variant::Full, Variant::S1, Variant::S2, Variant::S3, Variant::Ceng})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

class ScheduleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int n, const std::string& what)
      : Error("non-finite value at iteration " + std::to_string(n) + ": " + what), iteration(n) {}
  int iteration;
};

// ---------------------------------------------------------------------------
// Control sequences.

/// Constant c, or c / (n + n0)^p.
struct SeqDesc {
  enum class Kind { Constant, PowerLaw };
  Kind kind = Kind::Constant;
  double c = 0.0;
  double p = 0.0;
  double n0 = 0.0;

  static SeqDesc constant(double c) { return {Kind::Constant, c, 0.0, 0.0}; }
  static SeqDesc power_law(double c, double p, double n0 = 1.0) { return {Kind::PowerLaw, c, p, n0}; }

  double at(int n) const {
    if (kind == Kind::Constant) return c;
    return c / std::pow(static_cast<double>(n) + n0, p);
  }

  /// Decay exponent: s_n ~ n^-exponent. Infinite for the zero sequence.
  double decay() const {
    if (c == 0.0) return std::numeric_limits<double>::infinity();
    return kind == Kind::Constant ? 0.0 : p;
  }

  /// Exponent of |s_n - s_{n-1}|; infinite when the increments vanish.
  double increment_decay() const {
    if (c == 0.0 || kind == Kind::Constant || p == 0.0) return std::numeric_limits<double>::infinity();
    return p + 1.0;
  }

  bool operator==(const SeqDesc&) const = default;
};

struct Schedule {
  SeqDesc alpha = SeqDesc::power_law(1.0, 1.0, 1.0);
  SeqDesc beta = SeqDesc::power_law(1.0, 2.0, 1.0);
  SeqDesc lambda = SeqDesc::constant(1.0);
  SeqDesc r = SeqDesc::constant(1.0);
  SeqDesc a = SeqDesc::constant(0.0);

  /// alpha_n = 1/(n+1), beta_n = 1/(n+1)^2, lambda_n and r_n at the midpoint
  /// of (0, 2*ism) (1 when the modulus is unbounded), a_n = 0.
  static Schedule canonical(double ism_a, double ism_b) {
    Schedule s;
    s.lambda = SeqDesc::constant(std::isfinite(ism_a) ? ism_a : 1.0);
    s.r = SeqDesc::constant(std::isfinite(ism_b) ? ism_b : 1.0);
    return s;
  }

  bool operator==(const Schedule&) const = default;
};

enum class CheckStatus { Proved, EmpiricallyConsistent, Failed, Skipped };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Proved: return "proved";
    case CheckStatus::EmpiricallyConsistent: return "empirically_consistent";
    case CheckStatus::Failed: return "failed";
    case CheckStatus::Skipped: return "skipped";
  }
  return "?";
}

struct ScheduleCheck {
  std::string name;
  CheckStatus status = CheckStatus::Skipped;
  std::string detail;
};

struct ScheduleReport {
  std::vector<ScheduleCheck> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (c.status == CheckStatus::Failed) return false;
    return true;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (c.status == CheckStatus::Failed) out.push_back(c.name);
    return out;
  }
  const ScheduleCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

/// Finite-horizon decreasing-tail test on q_n for n in [h/2, h].
inline bool decreasing_tail(const std::vector<double>& q) {
  if (q.size() < 2) return true;
  const double first = q[q.size() / 2];
  const double last = q.back();
  if (!std::isfinite(last)) return false;
  return last <= 1e-12 || last < first;
}

inline std::string tail_detail(const std::vector<double>& q) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "tail %.3e -> %.3e", q[q.size() / 2], q.back());
  return buf;
}

}  // namespace detail

/// Checks (C1)-(C3) and the stepsize ranges. Limits are decided structurally
/// from the power-law exponents where possible; (C3) is a property of T and is
/// checked numerically along the probe points.
inline ScheduleReport validate_schedule(const Schedule& s, double ism_a, double ism_b, int horizon = 200,
                                        const IterateOracle* t = nullptr, const std::vector<Vector>& probes = {}) {
  if (horizon < 10) throw Error("validate_schedule: horizon must be >= 10");
  ScheduleReport rep;
  auto add = [&](std::string name, bool ok, std::string detail, CheckStatus pass = CheckStatus::Proved) {
    rep.checks.push_back({std::move(name), ok ? pass : CheckStatus::Failed, std::move(detail)});
  };
  auto ratios = [&](auto numer) {
    std::vector<double> q;
    for (int n = 2; n <= horizon; ++n) q.push_back(numer(n) / s.alpha.at(n));
    return q;
  };
  auto bad_power = [](const SeqDesc& d) { return d.kind == SeqDesc::Kind::PowerLaw && d.p < 0.0; };

  const double pa = s.alpha.decay();
  const bool alpha_power = s.alpha.kind == SeqDesc::Kind::PowerLaw;
  add("C1.alpha_vanishes", alpha_power && s.alpha.c > 0.0 && s.alpha.p > 0.0,
      alpha_power ? "alpha_n ~ n^-" + std::to_string(s.alpha.p) : "constant alpha does not vanish");
  add("C1.alpha_sum_diverges", s.alpha.c > 0.0 && pa <= 1.0,
      pa <= 1.0 ? "exponent <= 1" : "exponent " + std::to_string(pa) + " > 1 gives a summable series");

  auto in_unit = [&](const SeqDesc& d, bool strictly_positive) {
    const bool sign_ok = strictly_positive ? d.c > 0.0 : d.c >= 0.0;
    return sign_ok && !bad_power(d) && d.at(1) <= 1.0;  // nonincreasing
  };
  add("range.alpha", in_unit(s.alpha, true), "alpha_1 = " + std::to_string(s.alpha.at(1)));
  add("range.beta", in_unit(s.beta, false), "beta_1 = " + std::to_string(s.beta.at(1)));

  auto in_open = [&](const SeqDesc& d, double upper) {
    if (d.c <= 0.0 || bad_power(d)) return false;
    return d.at(1) < upper;  // nonincreasing, so sup is the first term
  };
  add("range.lambda", in_open(s.lambda, 2.0 * ism_a),
      "lambda_1 = " + std::to_string(s.lambda.at(1)) + ", bound 2*ism_A = " + std::to_string(2.0 * ism_a));
  add("range.r", in_open(s.r, 2.0 * ism_b),
      "r_1 = " + std::to_string(s.r.at(1)) + ", bound 2*ism_B = " + std::to_string(2.0 * ism_b));
  add("range.a", s.a.c >= 0.0 && !bad_power(s.a) && s.a.decay() > 0.0, "a_n must be >= 0 and vanish");

  auto over_alpha = [&](const std::string& name, const SeqDesc& d) {
    const auto q = ratios([&](int n) { return d.at(n); });
    add(name, d.decay() > pa && detail::decreasing_tail(q), detail::tail_detail(q));
  };
  over_alpha("C2.a_over_alpha", s.a);
  over_alpha("C2.beta_over_alpha", s.beta);

  auto increment = [&](const std::string& name, const SeqDesc& d) {
    const auto q = ratios([&](int n) { return std::abs(d.at(n) - d.at(n - 1)); });
    add(name, d.increment_decay() > pa && detail::decreasing_tail(q), detail::tail_detail(q));
  };
  increment("C2.alpha_increment", s.alpha);
  increment("C2.beta_increment", s.beta);
  increment("C2.lambda_increment", s.lambda);
  increment("C2.r_increment", s.r);

  if (t == nullptr || probes.empty()) {
    rep.checks.push_back({"C3.iterate_increment", CheckStatus::Skipped, "no iterate oracle supplied"});
  } else {
    bool ok = true;
    std::string det;
    for (const auto& x : probes) {
      std::vector<double> q;
      Vector prev = x;
      for (int n = 1; n <= horizon; ++n) {
        Vector cur = t->power(n, x);
        if (n >= 2) q.push_back((cur - prev).norm() / s.alpha.at(n));
        prev = std::move(cur);
      }
      ok = ok && detail::decreasing_tail(q);
      det = detail::tail_detail(q);
    }
    add("C3.iterate_increment", ok, det, CheckStatus::EmpiricallyConsistent);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Configuration.

struct SchemeConfig {
  ConvexSet C = ConvexSet::whole_space(1);
  Bifunction G = Bifunction::zero();
  ConvexFn phi = ConvexFn::zero();
  CertifiedOperator A = CertifiedOperator::zero(1);
  CertifiedOperator B = CertifiedOperator::zero(1);
  CertifiedOperator S = CertifiedOperator::identity(1);
  CertifiedOperator V = CertifiedOperator::zero(1);
  CertifiedOperator F = CertifiedOperator::identity(1);
  IterateOracle T = IterateOracle::identity(1);
  StrengthParams strengths{};
  Variant variant = Variant::Full;
  InnerOptions inner{};
  bool declared_b1 = false;

  double ism_a() const { return uses_a() ? A.ism_modulus().value_or(0.0) : std::numeric_limits<double>::infinity(); }
  double ism_b() const { return uses_b() ? B.ism_modulus().value_or(0.0) : std::numeric_limits<double>::infinity(); }
  bool uses_a() const { return variant == Variant::Full; }
  bool uses_b() const { return variant == Variant::Full || variant == Variant::S1 || variant == Variant::S2; }
  bool uses_s() const { return variant == Variant::Full || variant == Variant::S1 || variant == Variant::S3; }
  bool uses_resolvent() const { return variant != Variant::Ceng; }
};

/// Structural hypotheses of the configuration (not the schedule).
inline ValidationReport validate_config(const SchemeConfig& cfg) {
  ValidationReport rep = validate_strengths(cfg.strengths);
  const Eigen::Index d = cfg.C.dim();
  bool dims = true;
  for (const CertifiedOperator* op : {&cfg.A, &cfg.B, &cfg.S, &cfg.V, &cfg.F}) dims = dims && op->dim() == d;
  dims = dims && cfg.T.dim() == d;
  rep.entries.push_back({"dimensions", dims, "space dimension " + std::to_string(d)});
  if (cfg.uses_a())
    rep.entries.push_back({"A_ism", cfg.ism_a() > 0.0, "ism modulus of A must be positive"});
  if (cfg.uses_b())
    rep.entries.push_back({"B_ism", cfg.ism_b() > 0.0, "ism modulus of B must be positive"});
  if (cfg.uses_s()) rep.entries.push_back({"S_nonexpansive", cfg.S.nonexpansive(), "S must be nonexpansive"});
  {
    const auto l = cfg.F.lipschitz();
    const auto e = cfg.F.strong_monotonicity();
    const bool ok = l && e && *l <= cfg.strengths.L * (1 + 1e-12) && *e >= cfg.strengths.eta * (1 - 1e-12);
    rep.entries.push_back({"F_constants", ok, "F must certify Lipschitz <= L and strong monotonicity >= eta"});
  }
  {
    const auto g = cfg.V.lipschitz();
    rep.entries.push_back(
        {"V_constants", g && *g <= cfg.strengths.gamma + 1e-12, "V must certify Lipschitz <= gamma"});
  }
  if (cfg.uses_resolvent()) {
    bool a1a4 = cfg.G.kind() != Bifunction::Kind::Custom || cfg.G.custom_spec().declared_a1_a4;
    rep.entries.push_back({"G_conditions", a1a4, "(A1)-(A4) hold or are declared"});
    rep.entries.push_back({"existence_condition", cfg.declared_b1 || cfg.C.is_bounded(),
                           "(B2) C bounded, or (B1) declared"});
  }
  if (cfg.variant == Variant::Ceng) {
    rep.entries.push_back({"ceng_structure", cfg.G.is_zero() && cfg.phi.is_zero() && cfg.B.is_zero(),
                           "G = 0, phi = 0, B = 0"});
    rep.entries.push_back({"T_stationary", cfg.T.is_stationary(), "T^n = T required"});
  }
  return rep;
}

/// Derives the config of a reduced scheme from a full one. Stages the variant
/// drops are replaced by zero operators.
inline SchemeConfig reduce(Variant v, const SchemeConfig& full) {
  SchemeConfig out = full;
  out.variant = v;
  const Eigen::Index d = full.C.dim();
  switch (v) {
    case Variant::Full:
      break;
    case Variant::S1:
      out.A = CertifiedOperator::zero(d);
      break;
    case Variant::S2:
      out.A = CertifiedOperator::zero(d);
      out.S = CertifiedOperator::identity(d);
      break;
    case Variant::S3:
      out.A = CertifiedOperator::zero(d);
      out.B = CertifiedOperator::zero(d);
      break;
    case Variant::Ceng:
      if (!full.G.is_zero() || !full.phi.is_zero() || !full.B.is_zero())
        throw ConfigError("reduce(ceng): requires G = 0, phi = 0 and B = 0");
      if (!full.T.is_stationary()) throw ConfigError("reduce(ceng): requires a stationary iterate oracle (T^n = T)");
      out.A = CertifiedOperator::zero(d);
      out.S = CertifiedOperator::identity(d);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Iteration.

struct IterationState {
  int n = 1;
  Vector x;
  // Intermediates of the step that produced x (empty for the initial state).
  Vector u, z, y, t;
  bool oracle_left_c = false;

  static IterationState initial(Vector x1) {
    IterationState s;
    s.x = std::move(x1);
    return s;
  }
};

struct StepValues {
  double alpha, beta, lambda, r, a;
};

inline StepValues schedule_at(const Schedule& s, int n) {
  return {s.alpha.at(n), s.beta.at(n), s.lambda.at(n), s.r.at(n), s.a.at(n)};
}

inline void check_schedule_at(const SchemeConfig& cfg, const StepValues& v, int n) {
  auto fail = [n](const std::string& what) {
    throw ScheduleError("schedule value out of range at n = " + std::to_string(n) + ": " + what);
  };
  if (!(v.alpha >= 0.0 && v.alpha <= 1.0)) fail("alpha");
  if (!(v.beta >= 0.0 && v.beta <= 1.0)) fail("beta");
  if (cfg.uses_a() && !(v.lambda > 0.0 && v.lambda < 2.0 * cfg.ism_a())) fail("lambda");
  if (cfg.uses_resolvent() && !(v.r > 0.0 && v.r < 2.0 * cfg.ism_b())) fail("r");
}

inline constexpr double kMembershipTol = 1e-8;

/// One step of the configured scheme from state n to state n+1.
inline IterationState step(const SchemeConfig& cfg, const Schedule& sch, const IterationState& st) {
  const int n = st.n;
  const StepValues v = schedule_at(sch, n);
  check_schedule_at(cfg, v, n);
  const auto& mu = cfg.strengths.mu;
  const auto& rho = cfg.strengths.rho;
  const Vector& x = st.x;

  IterationState next;
  next.n = n + 1;
  if (cfg.variant == Variant::Ceng) {
    next.u = next.z = next.y = x;
  } else {
    ResolventSpec spec{cfg.G, cfg.phi, cfg.C, v.r, cfg.inner, cfg.declared_b1};
    next.u = cfg.variant == Variant::S3 ? resolvent(spec, x) : resolvent(spec, x - v.r * cfg.B(x));
    next.z = cfg.variant == Variant::Full ? cfg.C.project(next.u - v.lambda * cfg.A(next.u)) : next.u;
    next.y = cfg.variant == Variant::S2 ? next.u : cfg.C.project(v.beta * cfg.S(x) + (1.0 - v.beta) * next.z);
  }
  const Vector w = cfg.variant == Variant::Ceng ? cfg.T.power(1, x) : cfg.T.power(n, next.y);
  next.oracle_left_c = !cfg.C.contains(w, kMembershipTol);
  next.t = v.alpha * rho * cfg.V(x) + w - v.alpha * mu * cfg.F(w);
  next.x = cfg.C.project(next.t);
  if (!next.x.allFinite() || !next.t.allFinite()) throw DivergenceError(n, "x_{n+1}");
  return next;
}

// ---------------------------------------------------------------------------
// Residuals.

struct ResidualProbes {
  double r_probe = 1.0;
  double lambda_probe = 1.0;
  int fix_power = 1;

  static ResidualProbes defaults(const Schedule& s) { return {s.r.at(1), s.lambda.at(1), 1}; }
};

struct ResidualBundle {
  double gmep = 0.0;
  double vi = 0.0;
  double fix = 0.0;

  double composite() const { return std::max({gmep, vi, fix}); }
};

inline ResidualBundle residual_bundle(const SchemeConfig& cfg, const Vector& x, const ResidualProbes& probes) {
  ResidualBundle out;
  const Eigen::Index d = x.size();
  if (cfg.variant == Variant::S3) {
    ResolventSpec spec{cfg.G, cfg.phi, cfg.C, probes.r_probe, cfg.inner, cfg.declared_b1};
    out.gmep = (x - resolvent(spec, x)).norm();
  } else {
    const CertifiedOperator zero = CertifiedOperator::zero(d);
    out.gmep = gmep_residual(cfg.G, cfg.phi, cfg.uses_b() ? cfg.B : zero, cfg.C, probes.r_probe, x, cfg.inner);
  }
  if (cfg.uses_a()) {
    if (!(probes.lambda_probe > 0.0 && probes.lambda_probe < 2.0 * cfg.ism_a()))
      throw Error("residual_bundle: lambda_probe must lie in (0, 2*ism(A))");
    out.vi = (x - cfg.C.project(x - probes.lambda_probe * cfg.A(x))).norm();
  } else {
    out.vi = (x - cfg.C.project(x)).norm();
  }
  out.fix = (x - cfg.T.power(probes.fix_power, x)).norm();
  return out;
}

/// max over samples s of <(rho V - mu F)x, s - x>.
inline double hvi_gap(const SchemeConfig& cfg, const Vector& x, const std::vector<Vector>& feasible_samples) {
  if (feasible_samples.empty()) throw Error("hvi_gap: no feasible samples");
  const Vector dir = cfg.strengths.rho * cfg.V(x) - cfg.strengths.mu * cfg.F(x);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& s : feasible_samples) worst = std::max(worst, dir.dot(s - x));
  return worst;
}

// ---------------------------------------------------------------------------
// Solve.

struct TraceRecord {
  int n = 0;
  double step_norm = 0.0;
  double gap_ux = 0.0;
  double gap_uz = 0.0;
  double gap_xy = 0.0;
  ResidualBundle residuals;
  StepValues schedule{};
};

using Trace = std::vector<TraceRecord>;

enum class SolveStatus { Converged, MaxIters, Diverged };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

struct StopOptions {
  int max_iters = 10000;
  /// Stop once the composite residual at x_{n+1} is <= this; disabled when <= 0.
  double target_residual = 0.0;
  std::optional<Vector> known_solution;
  /// Skip the pre-run validation gate.
  bool force = false;
  bool keep_states = false;
  std::optional<ResidualProbes> probes;
  int validation_horizon = 200;
};

struct SolveResult {
  Vector x_final;
  Trace trace;
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  std::optional<int> diverged_at;
  std::string message;
  std::optional<double> final_error;
  int oracle_left_c = 0;
  std::vector<IterationState> states;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> failed)
      : Error(what), failures(std::move(failed)) {}
  std::vector<std::string> failures;
};

inline ScheduleReport validate_schedule_for(const SchemeConfig& cfg, const Schedule& sch, const Vector& x1,
                                            int horizon = 200) {
  return validate_schedule(sch, cfg.ism_a(), cfg.ism_b(), horizon, &cfg.T, {cfg.C.project(x1)});
}

/// Iterates step() from x1. Validation failures throw ValidationError unless
/// stop.force is set; non-finite iterates end the run with status Diverged.
inline SolveResult solve(const SchemeConfig& cfg, const Schedule& sch, const Vector& x1, const StopOptions& stop = {}) {
  if (x1.size() != cfg.C.dim()) throw DimensionError("solve", cfg.C.dim(), x1.size());
  if (!stop.force) {
    const ValidationReport vr = validate_config(cfg);
    const ScheduleReport sr = validate_schedule_for(cfg, sch, x1, stop.validation_horizon);
    std::vector<std::string> failed = vr.failures();
    for (auto& f : sr.failures()) failed.push_back(f);
    if (!failed.empty()) {
      std::string msg = "solve: validation failed:";
      for (const auto& f : failed) msg += " " + f;
      throw ValidationError(msg, failed);
    }
  }
  const ResidualProbes probes = stop.probes.value_or(ResidualProbes::defaults(sch));

  SolveResult res;
  IterationState st = IterationState::initial(x1);
  res.trace.reserve(static_cast<std::size_t>(std::max(0, stop.max_iters)));
  try {
    for (int k = 0; k < stop.max_iters; ++k) {
      IterationState next = step(cfg, sch, st);
      TraceRecord rec;
      rec.n = st.n;
      rec.step_norm = (next.x - st.x).norm();
      rec.gap_ux = (next.u - st.x).norm();
      rec.gap_uz = (next.u - next.z).norm();
      rec.gap_xy = (st.x - next.y).norm();
      rec.residuals = residual_bundle(cfg, next.x, probes);
      rec.schedule = schedule_at(sch, st.n);
      if (next.oracle_left_c) ++res.oracle_left_c;
      res.trace.push_back(rec);
      if (stop.keep_states) res.states.push_back(next);
      st = std::move(next);
      ++res.iterations;
      if (stop.target_residual > 0.0 && rec.residuals.composite() <= stop.target_residual) {
        res.status = SolveStatus::Converged;
        break;
      }
    }
  } catch (const DivergenceError& e) {
    res.status = SolveStatus::Diverged;
    res.diverged_at = e.iteration;
    res.message = e.what();
  }
  res.x_final = st.x;
  if (stop.known_solution) res.final_error = (res.x_final - *stop.known_solution).norm();
  return res;
}

/// Runs two variants of one problem for the same number of iterations and
/// returns max_i |x_n^a - x_n^b|_inf for n = 1..iters+1.
struct Comparison {
  SolveResult first;
  SolveResult second;
  std::vector<double> deviation;
  double max_deviation = 0.0;
};

inline Comparison compare_variants(const SchemeConfig& base, Variant a, Variant b, const Schedule& sch,
                                   const Vector& x1, StopOptions stop) {
  const SchemeConfig ca = reduce(a, base);
  const SchemeConfig cb = reduce(b, base);
  stop.keep_states = true;
  stop.target_residual = 0.0;
  Comparison cmp{solve(ca, sch, x1, stop), solve(cb, sch, x1, stop), {}, 0.0};
  const std::size_t len = std::min(cmp.first.states.size(), cmp.second.states.size());
  for (std::size_t i = 0; i < len; ++i) {
    const double dev = (cmp.first.states[i].x - cmp.second.states[i].x).cwiseAbs().maxCoeff();
    cmp.deviation.push_back(dev);
    cmp.max_deviation = std::max(cmp.max_deviation, dev);
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// x_{n+1} = (1 - alpha_n) x_n + alpha_n beta_n; returns x_n for n = last.
inline double xu_recursion(const SeqDesc& alpha, const SeqDesc& beta, double x1, int last) {
  double x = x1;
  for (int n = 1; n < last; ++n) x = (1.0 - alpha.at(n)) * x + alpha.at(n) * beta.at(n);
  return x;
}

/// Least-squares slope of values against their index.
inline double ls_slope(const std::vector<double>& ys) {
  const double n = static_cast<double>(ys.size());
  if (ys.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double xi = static_cast<double>(i);
    sx += xi;
    sy += ys[i];
    sxx += xi * xi;
    sxy += xi * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Slope of step_norm over the last `fraction` of the trace.
inline double tail_step_slope(const Trace& trace, double fraction = 0.1) {
  const std::size_t start = trace.size() - static_cast<std::size_t>(fraction * static_cast<double>(trace.size()));
  std::vector<double> ys;
  for (std::size_t i = start; i < trace.size(); ++i) ys.push_back(trace[i].step_norm);
  return ls_slope(ys);
}

// ---------------------------------------------------------------------------
// Trace export.

inline constexpr const char* kTraceHeader = "n,step_norm,gap_ux,gap_uz,gap_xy,gmep_res,vi_res,fix_res,alpha,beta,lambda,r,a";

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace) {
    os << r.n;
    for (double v : {r.step_norm, r.gap_ux, r.gap_uz, r.gap_xy, r.residuals.gmep, r.residuals.vi, r.residuals.fix,
                     r.schedule.alpha, r.schedule.beta, r.schedule.lambda, r.schedule.r, r.schedule.a})
      os << ',' << format_g17(v);
    os << '\n';
  }
}

}  // namespace hfp
