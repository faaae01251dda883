#include <CLI11.hpp>

#include <iostream>

#include "smpc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stochastic MPC with first-step constraint: synthesis, simulation, regions"};
  app.require_subcommand(1);

  smpc::CliOptions opt;
  std::string mode;
  std::uint64_t seed = 0;
  int runs = 0, steps = 0, resolution = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "scenario config (JSON)")->required();
    cmd->add_option("--out", opt.out, "output path")->required();
    cmd->add_option("--seed", seed, "base seed of the closed-loop runs");
    cmd->add_option("--workers", opt.workers, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--mode", mode, "proposed | rf-tube | robust")
        ->check(CLI::IsMember({"proposed", "rf-tube", "robust"}));
    cmd->add_option("--runs", runs, "number of closed-loop runs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--steps", steps, "steps per run")->check(CLI::NonNegativeNumber);
    cmd->add_option("--resolution", resolution, "grid cross-check resolution (0: off)")
        ->check(CLI::NonNegativeNumber);
  };

  auto* synth = app.add_subcommand("synth", "offline synthesis, writes a bundle");
  auto* simulate = app.add_subcommand("simulate", "closed-loop Monte Carlo from a bundle");
  auto* region = app.add_subcommand("region", "first-step regions of all modes");
  auto* report = app.add_subcommand("report", "synth, simulate and region into one directory");
  for (auto* c : {synth, simulate, region, report}) add_common(c);
  simulate->add_option("--bundle", opt.bundle, "bundle written by synth")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string name;
  for (auto* c : {synth, simulate, region, report})
    if (c->parsed()) name = c->get_name();
  auto* cmd = app.get_subcommand(name);
  if (cmd->count("--seed")) opt.seed = seed;
  if (cmd->count("--runs")) opt.runs = runs;
  if (cmd->count("--steps")) opt.steps = steps;
  if (cmd->count("--resolution")) opt.resolution = resolution;
  if (cmd->count("--mode")) opt.mode = smpc::mode_from_string(mode);

  return smpc::run_command(name, opt, std::cout, std::cerr);
}
