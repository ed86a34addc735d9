#pragma once

// Subcommands of the msrl command-line tool. Each writes its artifacts and a
// resolved_config.json into config.output.directory and returns an exit code.

#include "msrl/config.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace msrl::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailure = 1,
  kUsageError = 2,
  kAllDiverged = 3,
};

enum class Command { validate, solve, train, sweep };

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<int> workers;
  /// validate/solve: layout seed; train: trainer seed; sweep: the only seed.
  std::optional<std::uint64_t> seed;
};

void apply_overrides(ExperimentConfig &config, const Overrides &overrides, Command command);

int cmd_validate(const ExperimentConfig &config, std::ostream &log);
int cmd_solve(const ExperimentConfig &config, std::ostream &log);
int cmd_train(const ExperimentConfig &config, std::ostream &log);
int cmd_sweep(const ExperimentConfig &config, std::ostream &log);

int run_command(Command command, const ExperimentConfig &config, std::ostream &log);

}  // namespace msrl::cli
