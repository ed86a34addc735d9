#pragma once

// JSON experiment configuration shared by the CLI subcommands. Unknown keys are
// rejected; to_json() writes the resolved document with every default filled in.

#include "msrl/critical_period.hpp"
#include "msrl/gridnav.hpp"
#include "msrl/guidance.hpp"
#include "msrl/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msrl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NestingChecks { both, support, optimality };

struct EnvConfig {
  int level = 2;
  int grid_size = 7;
  std::uint64_t layout_seed = 0;
  int eval_set_size = 20;
  std::optional<int> time_limit;
  gridnav::Metric metric = gridnav::Metric::chebyshev;
  double gamma = 0.99;
  ObservationMode observation = ObservationMode::position;
  std::size_t state_cap = gridnav::NavModel::kDefaultStateCap;
  std::string mdp_file;  ///< solve only: read a text MDP instead of building a layout
};

struct GuidanceConfig {
  std::vector<int> stages{1, 2, 3};
  gridnav::BonusSemantics semantics = gridnav::BonusSemantics::one_time;
  bool shaping_only = true;  ///< validate: drop the per-step and timeout terms
  gridnav::RewardParams rewards;
};

/// Schedules as a cross product: every t_1 plus every offset vector.
struct ScheduleGrid {
  std::vector<std::int64_t> t1;
  std::vector<std::vector<std::int64_t>> offsets;

  std::vector<StageSchedule> expand() const;
};

struct ScheduleConfig {
  std::vector<StageSchedule> transitions;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool uni_stage_baseline = true;
  int workers = 1;
};

struct MeasurementConfig {
  double eps = 0.1;
  AnchorChoice anchor = AnchorChoice::first;
  double tie_tol = 1e-6;
  double vi_tol = 1e-9;
  NestingDirection direction = NestingDirection::shrinking;
  NestingChecks checks = NestingChecks::both;
  NotConvergedPolicy not_converged = NotConvergedPolicy::strict;
  int episodes_per_env = 1;
};

struct OutputConfig {
  std::string directory = "out";
};

struct ExperimentConfig {
  EnvConfig env;
  GuidanceConfig guidance;
  ScheduleConfig schedule;
  TrainerConfig trainer;
  MeasurementConfig measurement;
  OutputConfig output;

  EnvSpec env_spec() const;
  SweepSpec sweep_spec() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const nlohmann::json &doc);
ExperimentConfig load_config(const std::string &path);
nlohmann::json to_json(const ExperimentConfig &config);

const char *to_string(NestingChecks checks);

}  // namespace msrl
