#include "hfp/runner.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hfp;
using namespace hfp::runner;
namespace fs = std::filesystem;

namespace {

json box01() { return {{"kind", "box"}, {"lo", {0, 0}}, {"hi", {1, 1}}}; }

json selection_config(int iters) {
  return {{"problem",
           {{"generator", "selection"},
            {"params", {{"set", box01()}, {"v", {2, 2}}, {"rho", 0.25}, {"x1", {0, 0}}}}}},
          {"stopping", {{"max_iters", iters}}},
          {"seed", 7}};
}

struct Workdir : ::testing::Test {
  fs::path dir;
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() /
          ("hfp_runner_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string write(const std::string& name, const json& j) const {
    const auto p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static int cli(const std::string& args) {
    const std::string cmd = std::string("\"") + HFP_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }
  CommandOptions opts(const std::string& cfg) const {
    CommandOptions o;
    o.config_path = cfg;
    o.trace_path = path("trace.csv");
    o.summary_path = path("summary.json");
    return o;
  }
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing.

TEST(Config, ParsesSelection) {
  const RunConfig rc = parse_config(selection_config(10));
  EXPECT_EQ(rc.max_iters, 10);
  EXPECT_EQ(rc.seed, 7u);
  EXPECT_EQ(rc.variant, Variant::Full);
  const Problem p = build_problem(rc);
  EXPECT_EQ(p.name, "selection");
  EXPECT_TRUE(oracle_solution(p).isApprox(make_vector({0.5, 0.5})));
}

TEST(Config, UnknownKeysRejected) {
  json j = selection_config(10);
  j["stoping"] = j["stopping"];
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["stopping"]["max_iter"] = 3;
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["problem"]["params"]["rh0"] = 1;
  EXPECT_THROW(build_problem(parse_config(j)), MalformedConfig);
}

TEST(Config, MissingOrInvalidFields) {
  json j = selection_config(10);
  j.erase("stopping");
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["stopping"]["max_iters"] = -1;
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["variant"] = "s4";
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["schedule"] = {{"alpha", {{"kind", "geometric"}}}};
  EXPECT_THROW(parse_config(j), MalformedConfig);
  j = selection_config(10);
  j["problem"]["params"]["v"] = {1, 2, 3};
  EXPECT_THROW(build_problem(parse_config(j)), MalformedConfig);
}

TEST(Config, RoundTrip) {
  json j = selection_config(25);
  j["schedule"] = {{"alpha", {{"kind", "power_law"}, {"c", 1.0}, {"p", 0.9}, {"n0", 1.0}}}};
  j["variant"] = "s1";
  const RunConfig a = parse_config(j);
  const RunConfig b = parse_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(build_problem(b).sch.alpha, SeqDesc::power_law(1.0, 0.9, 1.0));
}

TEST(Config, InlineProblem) {
  json j = {{"problem",
             {{"inline",
               {{"set", box01()},
                {"operators",
                 {{"A", {{"kind", "translation_to_point"}, {"point", {0.4, 0.6}}}},
                  {"B", {{"kind", "psd_from_seed"}, {"seed", 3}, {"norm", 1.0}, {"center", {0.4, 0.6}}}}}},
                {"T", {{"kind", "contraction_to_point"}, {"point", {0.4, 0.6}}, {"factor", 0.5}}},
                {"bifunction", {{"kind", "linear"}, {"g", {{"kind", "scaled_identity"}, {"factor", 0.3}}}}},
                {"strengths", {{"mu", 1.0}}},
                {"x1", {0.9, 0.1}},
                {"known_solution", {0.4, 0.6}}}}}},
           {"stopping", {{"max_iters", 10}}}};
  const Problem p = build_problem(parse_config(j));
  EXPECT_EQ(p.cfg.strengths.eta, 1.0);  // derived from F = identity
  EXPECT_EQ(p.cfg.strengths.L, 1.0);
  EXPECT_TRUE(validate_problem(p).passed());
  j["problem"]["inline"]["operators"]["S"] = {{"kind", "lambda"}, {"code", "x*x"}};
  EXPECT_THROW(build_problem(parse_config(j)), MalformedConfig);
}

// ---------------------------------------------------------------------------
// Commands.

TEST_F(Workdir, RunSelection) {
  std::ostringstream log;
  ASSERT_EQ(run(opts(write("sel.json", selection_config(10000))), log), kOk) << log.str();
  const json summary = json::parse(slurp(path("summary.json")));
  EXPECT_EQ(summary["status"], "max_iters");
  EXPECT_EQ(summary["iterations"], 10000);
  EXPECT_EQ(summary["n_final"], 10001);
  EXPECT_LE(summary["final_error"].get<double>(), 2e-3);
  for (const char* k : {"gmep", "vi", "fix", "composite"}) EXPECT_TRUE(summary["final_residuals"].contains(k));
  EXPECT_TRUE(summary.contains("schedule_report"));
  EXPECT_TRUE(summary.contains("strength_report"));
  EXPECT_EQ(count_lines(slurp(path("trace.csv"))), 10001u);
}

TEST_F(Workdir, MissingFieldExitsTwo) {
  json j = selection_config(10);
  j["problem"]["params"].erase("set");
  std::ostringstream log;
  EXPECT_EQ(run(opts(write("bad.json", j)), log), kMalformedConfig);
  EXPECT_EQ(run(opts(path("does_not_exist.json")), log), kMalformedConfig);
  std::ofstream(path("garbage.json")) << "{ not json";
  EXPECT_EQ(run(opts(path("garbage.json")), log), kMalformedConfig);
}

TEST_F(Workdir, ValidateOnly) {
  CommandOptions o = opts(write("sel.json", selection_config(10000)));
  o.validate_only = true;
  std::ostringstream log;
  ASSERT_EQ(run(o, log), kOk);
  EXPECT_EQ(slurp(path("trace.csv")), std::string(kTraceHeader) + "\n");
  const json summary = json::parse(slurp(path("summary.json")));
  EXPECT_EQ(summary["status"], "validated");
  EXPECT_TRUE(summary["validation_passed"].get<bool>());
}

TEST_F(Workdir, ValidationFailureExitsThree) {
  json j = selection_config(20);
  j["schedule"] = {{"alpha", {{"kind", "power_law"}, {"c", 1.0}, {"p", 2.0}}},
                   {"beta", {{"kind", "power_law"}, {"c", 1.0}, {"p", 3.0}}}};
  CommandOptions o = opts(write("c1.json", j));
  std::ostringstream log;
  EXPECT_EQ(run(o, log), kValidationFailure);
  const json summary = json::parse(slurp(path("summary.json")));
  bool named = false;
  for (const auto& c : summary["schedule_report"])
    named = named || (c["name"] == "C1.alpha_sum_diverges" && c["status"] == "failed");
  EXPECT_TRUE(named);
  o.force = true;
  EXPECT_EQ(run(o, log), kOk);
}

TEST_F(Workdir, DivergenceExitsFour) {
  json j = {{"problem",
             {{"inline",
               {{"set", {{"kind", "whole_space"}, {"dim", 1}}},
                {"operators", {{"F", {{"kind", "affine"}, {"matrix", {{-1e200}}}}}}},
                {"strengths", {{"mu", 1.0}, {"eta", 1.0}, {"L", 1.0}}},
                {"x1", {1.0}},
                {"declared_b1", true}}}}},
           {"stopping", {{"max_iters", 50}}}};
  CommandOptions o = opts(write("div.json", j));
  std::ostringstream log;
  EXPECT_EQ(run(o, log), kValidationFailure);
  o.force = true;
  EXPECT_EQ(run(o, log), kDiverged);
  const json summary = json::parse(slurp(path("summary.json")));
  EXPECT_EQ(summary["status"], "diverged");
  EXPECT_TRUE(summary.contains("diverged_at"));
}

TEST_F(Workdir, CompareFullVersusCeng) {
  json j = {{"problem", {{"generator", "ceng_fixture"}}},
            {"stopping", {{"max_iters", 100}}},
            {"compare", {{"variants", {"full", "ceng"}}}}};
  std::ostringstream log;
  ASSERT_EQ(compare(opts(write("cmp.json", j)), log), kOk) << log.str();
  const json summary = json::parse(slurp(path("summary.json")));
  EXPECT_LE(summary["max_deviation"].get<double>(), 1e-12);
  EXPECT_EQ(summary["iterations"], 100);
  const std::string paired = slurp(path("trace.csv"));
  EXPECT_EQ(paired.substr(0, paired.find('\n')), "n,deviation,full_x0,full_x1,ceng_x0,ceng_x1");
  EXPECT_EQ(count_lines(paired), 101u);
  EXPECT_EQ(count_lines(slurp(path("trace.full.csv"))), 101u);
  EXPECT_EQ(count_lines(slurp(path("trace.ceng.csv"))), 101u);
}

TEST_F(Workdir, CompareFullVersusS1WithoutA) {
  json j = {{"problem",
             {{"inline",
               {{"set", box01()},
                {"operators", {{"B", {{"kind", "psd_from_seed"}, {"seed", 3}, {"norm", 1.0}, {"center", {0.4, 0.6}}}}}},
                {"T", {{"kind", "contraction_to_point"}, {"point", {0.4, 0.6}}, {"factor", 0.5}}},
                {"strengths", {{"mu", 1.0}}},
                {"x1", {0.9, 0.1}}}}}},
            {"stopping", {{"max_iters", 100}}},
            {"compare", {{"variants", {"full", "s1"}}}}};
  std::ostringstream log;
  ASSERT_EQ(compare(opts(write("cmp.json", j)), log), kOk) << log.str();
  EXPECT_LE(json::parse(slurp(path("summary.json")))["max_deviation"].get<double>(), 1e-12);
}

TEST_F(Workdir, CompareIncompatibleExitsThree) {
  json j = {{"problem", {{"generator", "singleton"}, {"params", {{"set", box01()}, {"p", {0.4, 0.6}}}}}},
            {"stopping", {{"max_iters", 10}}},
            {"seed", 5},
            {"compare", {{"variants", {"full", "ceng"}}}}};
  std::ostringstream log;
  EXPECT_EQ(compare(opts(write("cmp.json", j)), log), kValidationFailure);
  j.erase("compare");
  EXPECT_EQ(compare(opts(write("nocmp.json", j)), log), kMalformedConfig);
}

// ---------------------------------------------------------------------------
// Command-line binary.

TEST_F(Workdir, CliExitCodes) {
  const std::string cfg = write("sel.json", selection_config(200));
  EXPECT_EQ(cli("run --config " + cfg + " --trace " + path("t.csv") + " --summary " + path("s.json")), 0);
  EXPECT_EQ(count_lines(slurp(path("t.csv"))), 201u);
  EXPECT_EQ(cli("run --config " + cfg + " --max-iters 5 --trace " + path("t5.csv")), 0);
  EXPECT_EQ(count_lines(slurp(path("t5.csv"))), 6u);
  EXPECT_EQ(cli("run --config " + cfg + " --validate-only --trace " + path("v.csv")), 0);
  EXPECT_EQ(count_lines(slurp(path("v.csv"))), 1u);
  EXPECT_EQ(cli("run"), 2);                                  // --config missing
  EXPECT_EQ(cli("run --config " + cfg + " --bogus"), 2);   // unknown flag
  EXPECT_EQ(cli("launch --config " + cfg), 2);             // unknown subcommand
  EXPECT_EQ(cli("run --config " + path("nope.json")), 2);
}

TEST_F(Workdir, CliSeedReproducibility) {
  json j = {{"problem", {{"generator", "singleton"}, {"params", {{"set", box01()}, {"p", {0.4, 0.6}}}}}},
            {"stopping", {{"max_iters", 300}}},
            {"seed", 5}};
  const std::string cfg = write("single.json", j);
  ASSERT_EQ(cli("run --config " + cfg + " --trace " + path("a.csv")), 0);
  ASSERT_EQ(cli("run --config " + cfg + " --trace " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(cli("run --config " + cfg + " --seed 6 --trace " + path("c.csv")), 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));

  // Re-reading a regenerated config reproduces the run byte for byte.
  const std::string regen = write("regen.json", to_json(load_config(cfg)));
  ASSERT_EQ(cli("run --config " + regen + " --trace " + path("d.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("d.csv")));
}
