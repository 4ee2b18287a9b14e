#include <CLI11.hpp>

#include <iostream>

#include "wmflow/cli.hpp"

using namespace wmflow;

int main(int argc, char** argv) {
  CLI::App app{"Minimizing-movement solver for fourth-order degenerate parabolic equations"};
  app.set_version_flag("--version", cli::kVersion);
  app.require_subcommand(1);

  std::string config, mode;
  cli::Overrides o;
  std::string out, profile, backend;
  unsigned seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "config file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--tol-profile", profile, "checker tolerances")->check(CLI::IsMember({"strict", "default"}));
    sub->add_option("--backend", backend, "metric backend")->check(CLI::IsMember({"dynamic", "frozen"}));
    sub->add_option("--seed", seed, "seed for randomized certificates");
  };
  auto* run = app.add_subcommand("run", "run the scheme, write snapshots and a summary");
  auto* check = app.add_subcommand("check", "validate mobility and potential against the hypotheses");
  auto* sweep = app.add_subcommand("sweep", "run the parameter cross product in the config's sweep block");
  auto* compare = app.add_subcommand("compare", "run the scheme and the direct finite-difference solver");
  for (auto* s : {run, check, sweep, compare}) common(s);
  check->add_option("--mode", mode, "hypothesis set")->check(CLI::IsMember({"lsc", "general"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::ConfigFailure;
  }

  cli::RunConfig cfg;
  try {
    cfg = cli::load_config(config);
    for (auto* s : {run, check, sweep, compare}) {
      if (s->count("--out")) o.out = out;
      if (s->count("--tol-profile")) o.tol_profile = profile;
      if (s->count("--backend")) o.backend = backend;
      if (s->count("--seed")) o.seed = seed;
    }
    cli::apply_overrides(cfg, o);
    if (!mode.empty()) cfg.hypothesis_mode = mode;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::ConfigFailure;
  }

  if (*run) return cli::cmd_run(cfg, std::cout);
  if (*check) return cli::cmd_check(cfg, std::cout);
  if (*sweep) return cli::cmd_sweep(cfg, std::cout);
  return cli::cmd_compare(cfg, std::cout);
}
