#pragma once

// JSON run configuration and the batch `run` / `compare` commands behind the
// hfp command-line tool.

#include "hfp/engine.hpp"
#include "hfp/problems.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hfp::runner {

using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kMalformedConfig = 2,
  kValidationFailure = 3,
  kDiverged = 4,
};

/// Malformed configuration: parse errors, unknown keys, missing fields.
class MalformedConfig : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  json problem;
  json schedule = json::object();
  Variant variant = Variant::Full;
  int max_iters = 0;
  double target_residual = 0.0;
  std::string trace_path;
  std::string summary_path;
  std::uint64_t seed = 0;
  std::optional<std::pair<Variant, Variant>> compare;
};

// ---------------------------------------------------------------------------
// Parsing helpers.

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw MalformedConfig(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) throw MalformedConfig(where + ": unknown key '" + k + "'");
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedConfig(where + ": missing required field '" + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw MalformedConfig(where + ": expected a number");
  return j.get<double>();
}

inline double number_at(const json& obj, const char* key, const std::string& where) {
  return number(require(obj, key, where), where + "." + key);
}

inline Vector vec(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw MalformedConfig(where + ": expected a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], where);
  return v;
}

inline LinearMap mat(const json& j, Eigen::Index dim, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim)
    throw MalformedConfig(where + ": expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  LinearMap m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Vector row = vec(j[static_cast<std::size_t>(i)], where);
    if (row.size() != dim) throw MalformedConfig(where + ": row length mismatch");
    m.row(i) = row.transpose();
  }
  return m;
}

inline void require_dim(const Vector& v, Eigen::Index dim, const std::string& where) {
  if (v.size() != dim) throw MalformedConfig(where + ": dimension mismatch");
}

inline ConvexSet parse_set(const json& j, const std::string& where) {
  const std::string kind = require(j, "kind", where).get<std::string>();
  try {
    if (kind == "box") {
      check_keys(j, {"kind", "lo", "hi"}, where);
      return ConvexSet::box(vec(require(j, "lo", where), where + ".lo"), vec(require(j, "hi", where), where + ".hi"));
    }
    if (kind == "ball") {
      check_keys(j, {"kind", "center", "radius"}, where);
      return ConvexSet::ball(vec(require(j, "center", where), where + ".center"), number_at(j, "radius", where));
    }
    if (kind == "halfspace" || kind == "hyperplane") {
      check_keys(j, {"kind", "normal", "offset"}, where);
      Vector n = vec(require(j, "normal", where), where + ".normal");
      const double off = number_at(j, "offset", where);
      return kind == "halfspace" ? ConvexSet::halfspace(std::move(n), off) : ConvexSet::hyperplane(std::move(n), off);
    }
    if (kind == "simplex") {
      check_keys(j, {"kind", "dim", "scale"}, where);
      return ConvexSet::simplex(require(j, "dim", where).get<int>(), j.value("scale", 1.0));
    }
    if (kind == "whole_space") {
      check_keys(j, {"kind", "dim"}, where);
      return ConvexSet::whole_space(require(j, "dim", where).get<int>());
    }
    if (kind == "intersection") {
      check_keys(j, {"kind", "members"}, where);
      std::vector<ConvexSet> members;
      for (const auto& m : require(j, "members", where)) members.push_back(parse_set(m, where + ".members"));
      return ConvexSet::intersection(std::move(members));
    }
  } catch (const MalformedConfig&) {
    throw;
  } catch (const json::exception& e) {
    throw MalformedConfig(where + ": " + e.what());
  } catch (const Error& e) {
    throw MalformedConfig(where + ": " + e.what());
  }
  throw MalformedConfig(where + ": unknown set kind '" + kind + "'");
}

/// Operators come from a fixed registry; arbitrary code is not expressible.
inline CertifiedOperator parse_operator(const json& j, Eigen::Index dim, const std::string& where) {
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "zero") {
    check_keys(j, {"kind"}, where);
    return CertifiedOperator::zero(dim);
  }
  if (kind == "identity") {
    check_keys(j, {"kind"}, where);
    return CertifiedOperator::identity(dim);
  }
  if (kind == "scaled_identity") {
    check_keys(j, {"kind", "factor"}, where);
    return CertifiedOperator::scaled_identity(dim, number_at(j, "factor", where));
  }
  if (kind == "affine") {
    check_keys(j, {"kind", "matrix", "offset"}, where);
    LinearMap m = mat(require(j, "matrix", where), dim, where + ".matrix");
    Vector b = j.contains("offset") ? vec(j["offset"], where + ".offset") : Vector::Zero(dim);
    require_dim(b, dim, where + ".offset");
    return CertifiedOperator::affine(std::move(m), std::move(b));
  }
  if (kind == "translation_to_point") {
    check_keys(j, {"kind", "point"}, where);
    Vector p = vec(require(j, "point", where), where + ".point");
    require_dim(p, dim, where + ".point");
    return CertifiedOperator::translation_to_point(std::move(p));
  }
  if (kind == "psd_from_seed") {
    // x -> M (x - center), M random symmetric PSD with spectral norm `norm`.
    check_keys(j, {"kind", "seed", "norm", "center"}, where);
    const double nrm = number_at(j, "norm", where);
    if (!(nrm > 0.0)) throw MalformedConfig(where + ".norm: must be positive");
    Rng rng(require(j, "seed", where).get<std::uint64_t>());
    LinearMap m = hfp::detail::random_psd(rng, dim, 0.0, nrm);
    Vector c = j.contains("center") ? vec(j["center"], where + ".center") : Vector::Zero(dim);
    require_dim(c, dim, where + ".center");
    return CertifiedOperator("psd_from_seed", dim, [m, c](const Vector& x) -> Vector { return m * (x - c); },
                             {cert::Ism{1.0 / nrm}, cert::Lipschitz{nrm}, cert::StronglyMonotone{0.0}});
  }
  if (kind == "constant") {
    check_keys(j, {"kind", "value"}, where);
    Vector v = vec(require(j, "value", where), where + ".value");
    require_dim(v, dim, where + ".value");
    return CertifiedOperator::constant(std::move(v));
  }
  throw MalformedConfig(where + ": unknown operator kind '" + kind + "'");
}

inline IterateOracle parse_oracle(const json& j, Eigen::Index dim, const std::string& where) {
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "identity") {
    check_keys(j, {"kind"}, where);
    return IterateOracle::identity(dim);
  }
  if (kind == "contraction_to_point") {
    check_keys(j, {"kind", "point", "factor"}, where);
    Vector p = vec(require(j, "point", where), where + ".point");
    require_dim(p, dim, where + ".point");
    const double q = number_at(j, "factor", where);
    if (!(q >= 0.0 && q < 1.0)) throw MalformedConfig(where + ".factor: must lie in [0, 1)");
    return IterateOracle::composed(CertifiedOperator(
        "contraction", dim, [p, q](const Vector& x) -> Vector { return p + q * (x - p); },
        {cert::Lipschitz{q}, cert::Nonexpansive{}}));
  }
  if (kind == "projection") {
    check_keys(j, {"kind", "set"}, where);
    const ConvexSet d = parse_set(require(j, "set", where), where + ".set");
    if (d.dim() != dim) throw MalformedConfig(where + ".set: dimension mismatch");
    return IterateOracle::stationary(CertifiedOperator(
        "projection", dim, [d](const Vector& x) -> Vector { return d.project(x); }, {cert::Nonexpansive{}}));
  }
  throw MalformedConfig(where + ": unknown iterate oracle kind '" + kind + "'");
}

inline SeqDesc parse_seq(const json& j, const std::string& where) {
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "constant") {
    check_keys(j, {"kind", "c"}, where);
    return SeqDesc::constant(number_at(j, "c", where));
  }
  if (kind == "power_law") {
    check_keys(j, {"kind", "c", "p", "n0"}, where);
    return SeqDesc::power_law(number_at(j, "c", where), number_at(j, "p", where), j.value("n0", 1.0));
  }
  throw MalformedConfig(where + ": unknown sequence kind '" + kind + "'");
}

inline json seq_to_json(const SeqDesc& s) {
  if (s.kind == SeqDesc::Kind::Constant) return {{"kind", "constant"}, {"c", s.c}};
  return {{"kind", "power_law"}, {"c", s.c}, {"p", s.p}, {"n0", s.n0}};
}

inline Variant variant_from(const json& j, const std::string& where) {
  if (!j.is_string()) throw MalformedConfig(where + ": expected a string");
  auto v = parse_variant(j.get<std::string>());
  if (!v) throw MalformedConfig(where + ": unknown variant '" + j.get<std::string>() + "'");
  return *v;
}

inline Problem build_inline(const json& j, Variant variant) {
  const std::string w = "problem.inline";
  check_keys(j, {"set", "operators", "T", "bifunction", "phi", "strengths", "x1", "known_solution", "declared_b1"}, w);
  Problem prob;
  prob.name = "inline";
  SchemeConfig& cfg = prob.cfg;
  cfg.C = parse_set(require(j, "set", w), w + ".set");
  const Eigen::Index dim = cfg.C.dim();
  const json& ops = require(j, "operators", w);
  check_keys(ops, {"A", "B", "S", "V", "F"}, w + ".operators");
  auto op = [&](const char* name, CertifiedOperator fallback) {
    if (!ops.contains(name)) return fallback.with_name(name);
    return parse_operator(ops[name], dim, w + ".operators." + name).with_name(name);
  };
  cfg.A = op("A", CertifiedOperator::zero(dim));
  cfg.B = op("B", CertifiedOperator::zero(dim));
  cfg.S = op("S", CertifiedOperator::identity(dim));
  cfg.V = op("V", CertifiedOperator::zero(dim));
  cfg.F = op("F", CertifiedOperator::identity(dim));
  cfg.T = j.contains("T") ? parse_oracle(j["T"], dim, w + ".T") : IterateOracle::identity(dim);

  if (j.contains("bifunction")) {
    const json& b = j["bifunction"];
    const std::string kind = require(b, "kind", w + ".bifunction").get<std::string>();
    if (kind == "zero") {
      check_keys(b, {"kind"}, w + ".bifunction");
    } else if (kind == "linear") {
      check_keys(b, {"kind", "g"}, w + ".bifunction");
      cfg.G = Bifunction::linear(parse_operator(require(b, "g", w), dim, w + ".bifunction.g"));
    } else {
      throw MalformedConfig(w + ".bifunction: unknown kind '" + kind + "'");
    }
  }
  if (j.contains("phi")) {
    const json& f = j["phi"];
    const std::string kind = require(f, "kind", w + ".phi").get<std::string>();
    if (kind == "zero") {
      check_keys(f, {"kind"}, w + ".phi");
    } else if (kind == "quadratic") {
      check_keys(f, {"kind", "Q", "q"}, w + ".phi");
      Vector q = f.contains("q") ? vec(f["q"], w + ".phi.q") : Vector::Zero(dim);
      require_dim(q, dim, w + ".phi.q");
      try {
        cfg.phi = ConvexFn::quadratic(mat(require(f, "Q", w), dim, w + ".phi.Q"), std::move(q));
      } catch (const MalformedConfig&) {
        throw;
      } catch (const Error& e) {
        throw MalformedConfig(w + ".phi: " + e.what());
      }
    } else {
      throw MalformedConfig(w + ".phi: unknown kind '" + kind + "'");
    }
  }
  const json& st = require(j, "strengths", w);
  check_keys(st, {"mu", "rho", "gamma", "eta", "L"}, w + ".strengths");
  StrengthParams& sp = cfg.strengths;
  sp.mu = number_at(st, "mu", w + ".strengths");
  sp.rho = st.contains("rho") ? number(st["rho"], w + ".strengths.rho") : 0.0;
  sp.gamma = st.contains("gamma") ? number(st["gamma"], w) : cfg.V.lipschitz().value_or(0.0);
  sp.eta = st.contains("eta") ? number(st["eta"], w) : cfg.F.strong_monotonicity().value_or(0.0);
  sp.L = st.contains("L") ? number(st["L"], w) : cfg.F.lipschitz().value_or(0.0);
  cfg.variant = variant;
  cfg.declared_b1 = j.value("declared_b1", false);

  prob.x1 = j.contains("x1") ? vec(j["x1"], w + ".x1") : cfg.C.project(Vector::Zero(dim));
  require_dim(prob.x1, dim, w + ".x1");
  if (j.contains("known_solution")) {
    Vector p = vec(j["known_solution"], w + ".known_solution");
    require_dim(p, dim, w + ".known_solution");
    prob.solution = solution::Singleton{std::move(p)};
  }
  const double ia = cfg.A.ism_modulus().value_or(1.0);
  const double ib = cfg.B.ism_modulus().value_or(1.0);
  prob.sch = Schedule::canonical(ia, ib);
  return prob;
}

inline Problem build_generator(const json& j, std::uint64_t seed) {
  const std::string w = "problem";
  check_keys(j, {"generator", "params"}, w);
  const std::string gen = require(j, "generator", w).get<std::string>();
  const json params = j.value("params", json::object());
  const std::string pw = "problem.params";
  try {
    if (gen == "selection") {
      check_keys(params, {"set", "v", "rho", "x1"}, pw);
      const ConvexSet c = parse_set(require(params, "set", pw), pw + ".set");
      Vector v = vec(require(params, "v", pw), pw + ".v");
      require_dim(v, c.dim(), pw + ".v");
      std::optional<Vector> x1;
      if (params.contains("x1")) {
        x1 = vec(params["x1"], pw + ".x1");
        require_dim(*x1, c.dim(), pw + ".x1");
      }
      return make_selection(c, v, number_at(params, "rho", pw), x1);
    }
    if (gen == "singleton" || gen == "near_singleton") {
      check_keys(params, {"set", "p"}, pw);
      const ConvexSet c = parse_set(require(params, "set", pw), pw + ".set");
      Vector p = vec(require(params, "p", pw), pw + ".p");
      require_dim(p, c.dim(), pw + ".p");
      return gen == "singleton" ? make_singleton(seed, c, p) : make_near_singleton(seed, c, p);
    }
    if (gen == "ceng_fixture") {
      check_keys(params, {}, pw);
      return make_ceng_fixture();
    }
  } catch (const MalformedConfig&) {
    throw;
  } catch (const json::exception& e) {
    throw MalformedConfig(pw + ": " + e.what());
  } catch (const Error& e) {
    throw MalformedConfig(gen + ": " + e.what());
  }
  throw MalformedConfig(w + ": unknown generator '" + gen + "'");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  try {
    check_keys(j, {"problem", "schedule", "variant", "stopping", "outputs", "seed", "compare"}, "config");
    RunConfig rc;
    rc.problem = require(j, "problem", "config");
    if (!rc.problem.is_object()) throw MalformedConfig("problem: expected an object");
    if (rc.problem.contains("inline")) {
      check_keys(rc.problem, {"inline"}, "problem");
    } else {
      require(rc.problem, "generator", "problem");
    }
    if (j.contains("schedule")) {
      rc.schedule = j["schedule"];
      check_keys(rc.schedule, {"alpha", "beta", "lambda", "r", "a"}, "schedule");
      for (const auto& [k, v] : rc.schedule.items()) parse_seq(v, "schedule." + k);
    }
    if (j.contains("variant")) rc.variant = variant_from(j["variant"], "variant");
    const json& stop = require(j, "stopping", "config");
    check_keys(stop, {"max_iters", "target_residual"}, "stopping");
    const json& mi = require(stop, "max_iters", "stopping");
    if (!mi.is_number_integer() || mi.get<long long>() < 0)
      throw MalformedConfig("stopping.max_iters: expected a nonnegative integer");
    rc.max_iters = mi.get<int>();
    rc.target_residual = stop.contains("target_residual") ? number(stop["target_residual"], "stopping") : 0.0;
    if (j.contains("outputs")) {
      const json& out = j["outputs"];
      check_keys(out, {"trace_path", "summary_path"}, "outputs");
      rc.trace_path = out.value("trace_path", "");
      rc.summary_path = out.value("summary_path", "");
    }
    if (j.contains("seed")) {
      const json& sd = j["seed"];
      if (!sd.is_number_unsigned() && !(sd.is_number_integer() && sd.get<long long>() >= 0))
        throw MalformedConfig("seed: expected a nonnegative integer");
      rc.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("compare")) {
      const json& c = j["compare"];
      check_keys(c, {"variants"}, "compare");
      const json& vs = require(c, "variants", "compare");
      if (!vs.is_array() || vs.size() != 2) throw MalformedConfig("compare.variants: expected two variant names");
      rc.compare = std::make_pair(variant_from(vs[0], "compare.variants"), variant_from(vs[1], "compare.variants"));
    }
    return rc;
  } catch (const json::exception& e) {
    throw MalformedConfig(std::string("config: ") + e.what());
  }
}

inline json to_json(const RunConfig& rc) {
  json j;
  j["problem"] = rc.problem;
  if (!rc.schedule.empty()) j["schedule"] = rc.schedule;
  j["variant"] = to_string(rc.variant);
  j["stopping"] = {{"max_iters", rc.max_iters}, {"target_residual", rc.target_residual}};
  json out = json::object();
  if (!rc.trace_path.empty()) out["trace_path"] = rc.trace_path;
  if (!rc.summary_path.empty()) out["summary_path"] = rc.summary_path;
  if (!out.empty()) j["outputs"] = out;
  j["seed"] = rc.seed;
  if (rc.compare) j["compare"] = {{"variants", {to_string(rc.compare->first), to_string(rc.compare->second)}}};
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedConfig("cannot read config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MalformedConfig(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Builds the problem and applies schedule overrides from the config.
inline Problem build_problem(const RunConfig& rc) {
  Problem prob = rc.problem.contains("inline") ? detail::build_inline(rc.problem["inline"], rc.variant)
                                               : detail::build_generator(rc.problem, rc.seed);
  prob.cfg.variant = rc.variant;
  auto apply = [&](const char* key, SeqDesc& s) {
    if (rc.schedule.contains(key)) s = detail::parse_seq(rc.schedule[key], std::string("schedule.") + key);
  };
  apply("alpha", prob.sch.alpha);
  apply("beta", prob.sch.beta);
  apply("lambda", prob.sch.lambda);
  apply("r", prob.sch.r);
  apply("a", prob.sch.a);
  return prob;
}

// ---------------------------------------------------------------------------
// Reports.

struct Reports {
  ValidationReport strengths;
  ScheduleReport schedule;
  std::vector<CertReport> certification;

  bool passed() const {
    if (!strengths.passed() || !schedule.passed()) return false;
    for (const auto& c : certification)
      if (!c.passed) return false;
    return true;
  }
};

inline Reports validate_problem(const Problem& prob) {
  Reports r{validate_config(prob.cfg), validate_schedule_for(prob.cfg, prob.sch, prob.x1), {}};
  const Sampler sampler = Sampler::around(prob.cfg.C);
  for (const CertifiedOperator* op : {&prob.cfg.A, &prob.cfg.B, &prob.cfg.S, &prob.cfg.V, &prob.cfg.F})
    for (auto& rep : certify_all(*op, sampler, 200, 1e-9)) r.certification.push_back(std::move(rep));
  r.certification.push_back(near_nonexpansive_check(prob.cfg.T, 5, sampler, 50, 1e-9));
  return r;
}

inline json reports_json(const Reports& r) {
  json strengths = json::array();
  for (const auto& e : r.strengths.entries)
    strengths.push_back({{"name", e.name}, {"passed", e.passed}, {"detail", e.detail}});
  json schedule = json::array();
  for (const auto& c : r.schedule.checks)
    schedule.push_back({{"name", c.name}, {"status", to_string(c.status)}, {"detail", c.detail}});
  json certs = json::array();
  for (const auto& c : r.certification)
    certs.push_back({{"check", c.check}, {"passed", c.passed}, {"worst_violation", c.worst_violation}});
  json out{{"strength_report", strengths}, {"schedule_report", schedule}, {"certification", certs}};
  out["nu"] = r.strengths.nu ? json(*r.strengths.nu) : json(nullptr);
  return out;
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// ---------------------------------------------------------------------------
// Commands.

struct CommandOptions {
  std::string config_path;
  bool validate_only = false;
  bool force = false;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_path;
  std::optional<std::string> summary_path;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

inline RunConfig resolved_config(const CommandOptions& opt) {
  RunConfig rc = load_config(opt.config_path);
  if (opt.max_iters) rc.max_iters = *opt.max_iters;
  if (opt.seed) rc.seed = *opt.seed;
  if (opt.trace_path) rc.trace_path = *opt.trace_path;
  if (opt.summary_path) rc.summary_path = *opt.summary_path;
  return rc;
}

inline std::string trace_csv(const Trace& t) {
  std::ostringstream os;
  write_trace_csv(os, t);
  return os.str();
}

}  // namespace detail

/// `hfp run`: validate, solve, write the trace CSV and the JSON summary.
inline int run(const CommandOptions& opt, std::ostream& log = std::cerr) {
  RunConfig rc;
  Problem prob;
  try {
    rc = detail::resolved_config(opt);
    prob = build_problem(rc);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kMalformedConfig;
  }

  const Reports reports = validate_problem(prob);
  json summary = reports_json(reports);
  summary["problem"] = prob.name;
  summary["variant"] = to_string(rc.variant);
  summary["validation_passed"] = reports.passed();
  if (!reports.passed() && !opt.force) {
    log << "error: validation failed\n";
    summary["status"] = "validation_failed";
    if (!rc.summary_path.empty()) detail::write_text(rc.summary_path, summary.dump(2) + "\n");
    return kValidationFailure;
  }
  if (opt.validate_only) {
    summary["status"] = "validated";
    if (!rc.trace_path.empty()) detail::write_text(rc.trace_path, detail::trace_csv({}));
    if (!rc.summary_path.empty()) detail::write_text(rc.summary_path, summary.dump(2) + "\n");
    return kOk;
  }

  StopOptions stop;
  stop.max_iters = rc.max_iters;
  stop.target_residual = rc.target_residual;
  stop.force = true;  // validated above
  if (prob.has_solution()) stop.known_solution = oracle_solution(prob);
  SolveResult res;
  try {
    res = solve(prob.cfg, prob.sch, prob.x1, stop);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kValidationFailure;
  }

  summary["status"] = to_string(res.status);
  summary["n_final"] = res.iterations + 1;
  summary["iterations"] = res.iterations;
  summary["x_final"] = vector_json(res.x_final);
  if (!res.trace.empty()) {
    const auto& r = res.trace.back().residuals;
    summary["final_residuals"] = {{"gmep", r.gmep}, {"vi", r.vi}, {"fix", r.fix}, {"composite", r.composite()}};
  } else {
    const auto r = residual_bundle(prob.cfg, res.x_final, ResidualProbes::defaults(prob.sch));
    summary["final_residuals"] = {{"gmep", r.gmep}, {"vi", r.vi}, {"fix", r.fix}, {"composite", r.composite()}};
  }
  summary["final_error"] = res.final_error ? json(*res.final_error) : json(nullptr);
  summary["oracle_left_c"] = res.oracle_left_c;
  if (res.diverged_at) summary["diverged_at"] = *res.diverged_at;

  if (!rc.trace_path.empty()) detail::write_text(rc.trace_path, detail::trace_csv(res.trace));
  if (!rc.summary_path.empty()) detail::write_text(rc.summary_path, summary.dump(2) + "\n");
  if (res.status == SolveStatus::Diverged) {
    log << "error: " << res.message << '\n';
    return kDiverged;
  }
  return kOk;
}

/// `hfp compare`: runs two variants of one problem and records the maximum
/// coordinate deviation between their iterates.
inline int compare(const CommandOptions& opt, std::ostream& log = std::cerr) {
  RunConfig rc;
  Problem prob;
  try {
    rc = detail::resolved_config(opt);
    if (!rc.compare) throw MalformedConfig("compare: config has no 'compare' section");
    prob = build_problem(rc);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kMalformedConfig;
  }
  StopOptions stop;
  stop.max_iters = rc.max_iters;
  stop.force = opt.force;
  Comparison cmp;
  try {
    cmp = compare_variants(prob.cfg, rc.compare->first, rc.compare->second, prob.sch, prob.x1, stop);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kValidationFailure;
  }

  const std::string a = to_string(rc.compare->first);
  const std::string b = to_string(rc.compare->second);
  if (!rc.trace_path.empty()) {
    const std::filesystem::path base(rc.trace_path);
    auto sibling = [&](const std::string& tag) {
      return (base.parent_path() / (base.stem().string() + "." + tag + base.extension().string())).string();
    };
    detail::write_text(sibling(a), detail::trace_csv(cmp.first.trace));
    detail::write_text(sibling(b), detail::trace_csv(cmp.second.trace));
    std::ostringstream os;
    const Eigen::Index dim = prob.x1.size();
    os << "n,deviation";
    for (const auto& tag : {a, b})
      for (Eigen::Index i = 0; i < dim; ++i) os << ',' << tag << "_x" << i;
    os << '\n';
    for (std::size_t k = 0; k < cmp.deviation.size(); ++k) {
      os << k + 2 << ',' << format_g17(cmp.deviation[k]);
      for (const auto* st : {&cmp.first.states[k], &cmp.second.states[k]})
        for (Eigen::Index i = 0; i < dim; ++i) os << ',' << format_g17(st->x[i]);
      os << '\n';
    }
    detail::write_text(rc.trace_path, os.str());
  }
  json summary{{"problem", prob.name},
               {"variants", {a, b}},
               {"iterations", cmp.deviation.size()},
               {"max_deviation", cmp.max_deviation},
               {"status", {to_string(cmp.first.status), to_string(cmp.second.status)}}};
  if (!rc.summary_path.empty()) detail::write_text(rc.summary_path, summary.dump(2) + "\n");
  if (cmp.first.status == SolveStatus::Diverged || cmp.second.status == SolveStatus::Diverged) return kDiverged;
  return kOk;
}

}  // namespace hfp::runner
