#pragma once

// Tabular learners trained under a switched (multi-stage) reward.

#include "msrl/gridnav.hpp"
#include "msrl/guidance.hpp"
#include "msrl/mdp.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace msrl {

enum class Algorithm { q_learning, actor_critic };

/// What the learner's table is indexed by.
enum class ObservationMode {
  position,  ///< (layout, cell): the clock and bonus flags are hidden
  state,     ///< (layout, full model state)
};

const char *to_string(Algorithm algorithm);
const char *to_string(ObservationMode mode);

/// One stationary task of the training distribution. All tasks of a family
/// share the action set, the discount and the number of guidances.
struct TrainingTask {
  GuidanceStack<double> stack;
  Index start_state = 0;
  std::vector<Index> observation;         ///< per state; -1 on terminal states
  std::vector<gridnav::Outcome> outcome;  ///< per state; none on live states
};

struct TrainingFamily {
  std::vector<TrainingTask> tasks;
  Index n_observations = 0;

  Index n_actions() const { return tasks.front().stack.base().n_actions(); }
  std::size_t n_stages() const { return tasks.front().stack.size(); }
  void validate() const;
  /// Family whose tasks keep only the listed zero-based stages.
  TrainingFamily select_stages(const std::vector<std::size_t> &stages) const;
};

/// Builds a family from compiled gridnav models, one task per model.
TrainingFamily make_family(std::span<const gridnav::NavModel> models, const std::vector<int> &stages,
                           ObservationMode mode);

struct TrainerConfig {
  Algorithm algorithm = Algorithm::q_learning;
  double learning_rate = 0.1;         ///< Q-learning step size
  double learning_rate_power = 0.0;   ///< step size lr * (1 + visits)^-power; 0 keeps it constant
  double actor_learning_rate = 0.05;
  double critic_learning_rate = 0.01;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::int64_t epsilon_decay_steps = 0;  ///< 0: a third of total_steps
  double temperature = 1.0;              ///< softmax temperature of the actor
  std::int64_t total_steps = 0;
  std::int64_t snapshot_every = 0;  ///< 0: total_steps / 200
  std::uint64_t seed = 0;
  bool record_steps = false;

  std::int64_t resolved_snapshot_every() const;
  std::int64_t resolved_epsilon_decay_steps() const;
  double epsilon_at(std::int64_t step) const;
  void validate(const StageSchedule &schedule) const;
};

struct Snapshot {
  std::int64_t step = 0;
  std::vector<Index> greedy;  ///< greedy action per observation
  std::uint64_t digest = 0;   ///< hash of the parameter table the greedy actions derive from
};

struct EpisodeRecord {
  std::int64_t end_step = 0;  ///< global step count when the episode ended
  double episode_return = 0.0;
  gridnav::Outcome outcome = gridnav::Outcome::none;
  std::size_t stage = 0;  ///< zero-based stage of the episode's last step
  std::size_t task = 0;
};

struct StepRecord {
  std::int64_t step = 0;
  std::size_t task = 0;
  Index state = 0;
  Index action = 0;
  double reward = 0.0;
};

struct TrainingTrace {
  std::vector<Snapshot> snapshots;
  std::vector<EpisodeRecord> episodes;
  std::vector<StepRecord> steps;  ///< only with TrainerConfig::record_steps
  Eigen::MatrixXd parameters;     ///< final Q table or actor preferences, observations x actions
};

/// Greedy action per row, ties to the lowest index.
std::vector<Index> greedy_actions(const Eigen::MatrixXd &parameters);
std::uint64_t parameter_digest(const Eigen::MatrixXd &parameters);

/// The snapshot's greedy policy over one task's states (terminal states take action 0).
DeterministicPolicy policy_for(const TrainingTask &task, const Snapshot &snapshot);

TrainingTrace train(const TrainingFamily &family, const StageSchedule &schedule, const TrainerConfig &cfg);

/// MDP against which convergence is measured, with its optimal values.
struct AnchorTask {
  TabularMDP<double> mdp;
  ValueFunction<double> v_star;
  std::vector<Index> observation;
};

/// Anchors built from stage `stage` (zero-based) of every task.
std::vector<AnchorTask> make_anchors(const TrainingFamily &family, std::size_t stage, double vi_tol = 1e-9);

/// First snapshot step whose greedy policy is eps-converged on every anchor; nullopt if none.
std::optional<std::int64_t> convergence_step(const TrainingTrace &trace, std::span<const AnchorTask> anchors,
                                             double eps);
/// Single-MDP form for traces whose observations are the MDP's states.
std::optional<std::int64_t> convergence_step(const TrainingTrace &trace, const TabularMDP<double> &eval_mdp,
                                             double eps);

/// CSV: step,episode_return,outcome,stage_index (stage 1-based).
void write_trace_csv(std::ostream &out, const TrainingTrace &trace);
/// Text table: observation action.
void write_policy_table(std::ostream &out, const Snapshot &snapshot);

}  // namespace msrl
