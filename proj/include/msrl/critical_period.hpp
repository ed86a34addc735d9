#pragma once

// Sweeps over stage-transition schedules: convergence step per (schedule, seed),
// the empirical critical period, and the uni- vs multi-stage comparison.

#include "msrl/gridnav.hpp"
#include "msrl/trainer.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace msrl {

/// Which stage MDP anchors V* in the convergence test.
enum class AnchorChoice { first, last };
enum class NotConvergedPolicy { strict, lenient };

const char *to_string(AnchorChoice anchor);
const char *to_string(NotConvergedPolicy policy);

struct EnvSpec {
  int level = 2;
  int grid_size = 7;
  std::uint64_t layout_seed = 0;
  int eval_set_size = 20;  ///< level 1 always uses its single fixed layout
  gridnav::EnvOptions options;
  ObservationMode observation = ObservationMode::position;
  std::size_t state_cap = gridnav::NavModel::kDefaultStateCap;
};

/// Layouts of the evaluation set: layout_seed, layout_seed + 1, ...
std::vector<gridnav::LayoutSpec> evaluation_layouts(const EnvSpec &env);

/// Compiled, read-only data shared by every run of a sweep.
struct Experiment {
  std::vector<gridnav::GridNavEnv> envs;
  std::vector<gridnav::NavModel> models;
  TrainingFamily family;  ///< all guidance stages
  std::vector<AnchorTask> anchors;

  /// Success rate of a snapshot's greedy policy over the evaluation set.
  double success(const Snapshot &snapshot, int episodes_per_env = 1) const;
};

Experiment build_experiment(const EnvSpec &env, const std::vector<int> &stages, AnchorChoice anchor,
                            double vi_tol = 1e-9);

struct SweepSpec {
  EnvSpec env;
  std::vector<int> stages{1, 2, 3};
  std::vector<StageSchedule> schedule_grid;
  std::vector<std::uint64_t> seeds;
  double eps = 0.1;
  double vi_tol = 1e-9;
  TrainerConfig trainer;  ///< seed is taken from `seeds`; total_steps 0 means the largest t_N
  bool uni_stage_baseline = true;
  AnchorChoice anchor = AnchorChoice::first;
  int workers = 1;
  int episodes_per_env = 1;

  /// Copy with sorted unique seeds and a concrete total step budget.
  SweepSpec normalized() const;
};

struct CellResult {
  std::size_t schedule = 0;  ///< index into SweepResult::schedules; baseline is schedules.size()
  bool baseline = false;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> convergence;  ///< nullopt: not converged
  double final_success = 0.0;
  std::vector<std::pair<std::int64_t, double>> success_curve;
  std::size_t goal_episodes = 0;
  std::size_t non_goal_episodes = 0;
  std::size_t timeout_episodes = 0;
  std::string error;  ///< non-empty when the run failed
};

struct ScheduleSummary {
  std::string label;
  StageSchedule schedule;
  bool baseline = false;
  std::size_t runs = 0;
  std::size_t converged = 0;
  double mean_l = 0.0;  ///< +inf when undefined under the chosen policy
  double std_l = 0.0;
  double mean_success = 0.0;
  double std_success = 0.0;
};

struct SweepResult {
  std::vector<StageSchedule> schedules;
  std::optional<StageSchedule> baseline;
  std::vector<std::uint64_t> seeds;
  std::vector<CellResult> cells;  ///< ordered by (schedule, seed); baseline cells last

  std::vector<ScheduleSummary> summarize(NotConvergedPolicy policy = NotConvergedPolicy::strict) const;
};

/// Single (schedule, seed) run, as executed inside a sweep.
CellResult run_cell(const Experiment &experiment, const SweepSpec &spec, const StageSchedule &schedule,
                    bool baseline, std::uint64_t seed);

SweepResult run_sweep(const SweepSpec &spec);
SweepResult run_sweep(const SweepSpec &spec, const Experiment &experiment);

class AllDivergedError : public std::runtime_error {
 public:
  AllDivergedError() : std::runtime_error("ALL_DIVERGED: no schedule converged") {}
};

/// Multi-stage schedule with the smallest mean convergence step; ties go to the
/// lexicographically smallest schedule. Throws AllDivergedError if none converged.
StageSchedule critical_period(const SweepResult &result, NotConvergedPolicy policy = NotConvergedPolicy::strict);

struct ComparisonReport {
  std::optional<StageSchedule> best_multi;
  double best_multi_mean = 0.0;
  double best_multi_std = 0.0;
  std::vector<double> best_multi_per_seed;
  double uni_mean = 0.0;
  double uni_std = 0.0;
  std::vector<double> uni_per_seed;

  double margin() const { return best_multi ? best_multi_mean - uni_mean : 0.0; }
};

/// Best multi-stage schedule by mean final success against the uni-stage baseline.
ComparisonReport compare_uni_multi(const SweepResult &result);

/// One row per cell: label,t_1..t_N,seed,L,success,goal,non_goal,timeout,error.
void write_cells_csv(std::ostream &out, const SweepResult &result);
/// One row per schedule: label,t_1..t_N,runs,converged,mean_L,std_L,mean_success,std_success.
void write_summary_csv(std::ostream &out, const SweepResult &result, NotConvergedPolicy policy);
/// Gnuplot data: one block per schedule (step, mean success, std success), blocks separated by two blank lines.
void write_curves(std::ostream &out, const SweepResult &result);
/// Critical period, its stage-2 window, success ranking and the uni/multi comparison. Returns false on ALL_DIVERGED.
bool write_report(std::ostream &out, const SweepResult &result, NotConvergedPolicy policy);

}  // namespace msrl
