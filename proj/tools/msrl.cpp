#include "msrl/commands.hpp"
#include "msrl/config.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  using msrl::cli::Command;

  CLI::App app{"Multi-stage reward guidance experiments on tabular gridworlds"};
  app.require_subcommand(1);

  std::string config_path;
  msrl::cli::Overrides overrides;
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed = 0;

  const std::vector<std::pair<Command, CLI::App *>> commands{
      {Command::validate, app.add_subcommand("validate", "Check support and optimal-policy nesting of the guidance stack")},
      {Command::solve, app.add_subcommand("solve", "Solve stage MDPs exactly: optimal values and policy sets")},
      {Command::train, app.add_subcommand("train", "Train one learner under a stage schedule")},
      {Command::sweep, app.add_subcommand("sweep", "Sweep stage schedules and seeds; report the critical period")},
  };
  for (const auto &[command, sub] : commands) {
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output.directory)");
    sub->add_option("--workers", workers, "Concurrent sweep cells")->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", seed, "Layout seed (validate, solve), trainer seed (train) or the only seed (sweep)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msrl::cli::kUsageError;
  }

  for (const auto &[command, sub] : commands) {
    if (!sub->parsed()) continue;
    if (sub->count("--out")) overrides.out_dir = out_dir;
    if (sub->count("--workers")) overrides.workers = workers;
    if (sub->count("--seed-override")) overrides.seed = seed;
    try {
      auto config = msrl::load_config(config_path);
      msrl::cli::apply_overrides(config, overrides, command);
      return msrl::cli::run_command(command, config, std::cout);
    } catch (const msrl::ConfigError &e) {
      std::cerr << "config error: " << e.what() << '\n';
      return msrl::cli::kUsageError;
    } catch (const std::exception &e) {
      std::cerr << "error: " << e.what() << '\n';
      return msrl::cli::kUsageError;
    }
  }
  return msrl::cli::kUsageError;
}
