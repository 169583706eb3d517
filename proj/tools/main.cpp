#include <drlyap/experiment.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Train, verify and simulate distributionally robust neural Lyapunov controllers"};
  app.require_subcommand(1);

  drlyap::RunOverrides overrides;
  std::uint64_t seed = 0;
  std::string output_dir;
  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--output-dir", output_dir, "Override the output directory");
  };

  std::string config;
  auto* train = app.add_subcommand("train", "Train the baseline and DR pairs");
  train->add_option("config", config, "Experiment config (JSON)")->required();
  add_overrides(train);

  std::string pair;
  auto* verify = app.add_subcommand("verify", "Certify a trained pair on a grid");
  verify->add_option("pair", pair, "Pair header written by train")->required();
  verify->add_option("config", config, "Experiment config (JSON)")->required();
  add_overrides(verify);

  std::string baseline;
  std::string dr;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop rollouts of two pairs");
  simulate->add_option("baseline", baseline, "Baseline pair header")->required();
  simulate->add_option("dr", dr, "DR pair header")->required();
  simulate->add_option("config", config, "Experiment config (JSON)")->required();
  add_overrides(simulate);

  std::string experiment;
  auto* repro = app.add_subcommand("repro", "Full pipeline with a pass/fail table");
  repro->add_option("experiment", experiment, "Preset (pendulum-dr, mountain-car-dr) or config path")
      ->required();
  add_overrides(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? drlyap::kExitOk : drlyap::kExitUsage;
  }

  for (auto* cmd : {train, verify, simulate, repro}) {
    if (cmd->count("--seed") > 0) overrides.seed = seed;
    if (cmd->count("--output-dir") > 0) overrides.output_dir = output_dir;
  }

  if (*train) return drlyap::cmd_train(config, overrides, std::cout, std::cerr);
  if (*verify) return drlyap::cmd_verify(pair, config, overrides, std::cout, std::cerr);
  if (*simulate) return drlyap::cmd_simulate(baseline, dr, config, overrides, std::cout, std::cerr);
  return drlyap::cmd_repro(experiment, overrides, std::cout, std::cerr);
}
