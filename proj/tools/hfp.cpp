// Command-line front-end: `hfp run` and `hfp compare`.

#include "hfp/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

void add_common(CLI::App* cmd, hfp::runner::CommandOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON run configuration")->required();
  cmd->add_flag("--force", opt.force, "run even when validation fails");
  cmd->add_option("--max-iters", opt.max_iters, "override stopping.max_iters");
  cmd->add_option("--seed", opt.seed, "override the generator seed");
  cmd->add_option("--trace", opt.trace_path, "trace CSV output path");
  cmd->add_option("--summary", opt.summary_path, "summary JSON output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hfp: projection iteration for hierarchical fixed point and equilibrium problems"};
  app.require_subcommand(1);

  hfp::runner::CommandOptions run_opt;
  auto* run = app.add_subcommand("run", "validate and solve one configuration");
  add_common(run, run_opt);
  run->add_flag("--validate-only", run_opt.validate_only, "write reports and stop before iterating");

  hfp::runner::CommandOptions cmp_opt;
  auto* cmp = app.add_subcommand("compare", "run two scheme variants on one problem");
  add_common(cmp, cmp_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hfp::runner::kMalformedConfig;
  }

  if (run->parsed()) return hfp::runner::run(run_opt);
  return hfp::runner::compare(cmp_opt);
}
