#include "msrl/trainer.hpp"

#include "msrl/format.hpp"
#include "msrl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace msrl {

namespace {

using gridnav::Outcome;

Index argmax_random_ties(const Eigen::Ref<const Eigen::RowVectorXd> &row, Rng &rng) {
  const double best = row.maxCoeff();
  Index ties = 0;
  for (Index a = 0; a < row.size(); ++a) ties += row(a) == best ? 1 : 0;
  auto pick = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(ties)));
  for (Index a = 0; a < row.size(); ++a)
    if (row(a) == best && pick-- == 0) return a;
  return 0;
}

class QLearner {
 public:
  QLearner(Index n_obs, Index n_actions, double gamma, const TrainerConfig &cfg)
      : q_(Eigen::MatrixXd::Zero(n_obs, n_actions)),
        visits_(Eigen::MatrixXd::Zero(n_obs, n_actions)),
        gamma_(gamma),
        cfg_(cfg) {}

  Index act(Index obs, std::int64_t step, Rng &rng) const {
    if (uniform_real(rng) < cfg_.epsilon_at(step))
      return static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(q_.cols())));
    return argmax_random_ties(q_.row(obs), rng);
  }

  void update(Index obs, Index action, double reward, Index next_obs) {
    const double bootstrap = next_obs < 0 ? 0.0 : gamma_ * q_.row(next_obs).maxCoeff();
    double alpha = cfg_.learning_rate;
    if (cfg_.learning_rate_power > 0.0) alpha *= std::pow(1.0 + visits_(obs, action), -cfg_.learning_rate_power);
    visits_(obs, action) += 1.0;
    q_(obs, action) += alpha * (reward + bootstrap - q_(obs, action));
  }

  const Eigen::MatrixXd &parameters() const { return q_; }

 private:
  Eigen::MatrixXd q_;
  Eigen::MatrixXd visits_;
  double gamma_;
  const TrainerConfig &cfg_;
};

/// One-step actor-critic: softmax preferences and a state-value critic.
class ActorCritic {
 public:
  ActorCritic(Index n_obs, Index n_actions, double gamma, const TrainerConfig &cfg)
      : prefs_(Eigen::MatrixXd::Zero(n_obs, n_actions)),
        critic_(Eigen::VectorXd::Zero(n_obs)),
        gamma_(gamma),
        cfg_(cfg) {}

  Index act(Index obs, std::int64_t, Rng &rng) const {
    const Eigen::RowVectorXd p = probabilities(obs);
    double u = uniform_real(rng);
    for (Index a = 0; a + 1 < p.size(); ++a) {
      if (u < p(a)) return a;
      u -= p(a);
    }
    return p.size() - 1;
  }

  void update(Index obs, Index action, double reward, Index next_obs) {
    const double next_value = next_obs < 0 ? 0.0 : critic_(next_obs);
    const double td = reward + gamma_ * next_value - critic_(obs);
    critic_(obs) += cfg_.critic_learning_rate * td;
    const Eigen::RowVectorXd p = probabilities(obs);
    const double scale = cfg_.actor_learning_rate * td / cfg_.temperature;
    prefs_.row(obs) -= scale * p;
    prefs_(obs, action) += scale;
  }

  const Eigen::MatrixXd &parameters() const { return prefs_; }

 private:
  Eigen::RowVectorXd probabilities(Index obs) const {
    const Eigen::RowVectorXd z = (prefs_.row(obs).array() - prefs_.row(obs).maxCoeff()) / cfg_.temperature;
    const Eigen::RowVectorXd e = z.array().exp();
    return e / e.sum();
  }

  Eigen::MatrixXd prefs_;
  Eigen::VectorXd critic_;
  double gamma_;
  const TrainerConfig &cfg_;
};

Index sample_next(const TransitionMatrix<double> &P, Index row, Rng &rng) {
  TransitionMatrix<double>::InnerIterator it(P, row);
  if (P.outerIndexPtr()[row + 1] - P.outerIndexPtr()[row] == 1) return it.col();
  double u = uniform_real(rng);
  Index last = it.col();
  for (; it; ++it) {
    last = it.col();
    if (u < it.value()) return last;
    u -= it.value();
  }
  return last;
}

template <typename Learner>
TrainingTrace run(const TrainingFamily &family, const StageSchedule &schedule, const TrainerConfig &cfg) {
  std::vector<SwitchedReward<double>> rewards;
  rewards.reserve(family.tasks.size());
  for (const auto &task : family.tasks) rewards.push_back(compose_switched_reward(task.stack, schedule));

  const Index A = family.n_actions();
  Learner learner(family.n_observations, A, family.tasks.front().stack.base().gamma(), cfg);
  Rng rng(cfg.seed);
  const std::int64_t every = cfg.resolved_snapshot_every();

  TrainingTrace trace;
  auto snapshot = [&](std::int64_t step) {
    trace.snapshots.push_back({step, greedy_actions(learner.parameters()), parameter_digest(learner.parameters())});
  };
  auto pick_task = [&]() -> std::size_t {
    return family.tasks.size() == 1 ? 0 : static_cast<std::size_t>(uniform_index(rng, family.tasks.size()));
  };

  std::size_t task_index = pick_task();
  Index state = family.tasks[task_index].start_state;
  double episode_return = 0.0;
  for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
    if (step % every == 0) snapshot(step);
    const TrainingTask &task = family.tasks[task_index];
    const Index obs = task.observation[static_cast<std::size_t>(state)];
    const Index action = learner.act(obs, step, rng);
    const double reward = rewards[task_index](step, state, action);
    const Index next = sample_next(task.stack.base().transitions(), task.stack.base().row(state, action), rng);
    const Index next_obs = task.observation[static_cast<std::size_t>(next)];
    learner.update(obs, action, reward, next_obs);
    if (cfg.record_steps) trace.steps.push_back({step, task_index, state, action, reward});
    episode_return += reward;

    if (next_obs < 0) {
      trace.episodes.push_back({step + 1, episode_return, task.outcome[static_cast<std::size_t>(next)],
                                schedule.stage_at(step), task_index});
      task_index = pick_task();
      state = family.tasks[task_index].start_state;
      episode_return = 0.0;
    } else {
      state = next;
    }
  }
  if (trace.snapshots.empty() || trace.snapshots.back().step != cfg.total_steps) snapshot(cfg.total_steps);
  trace.parameters = learner.parameters();
  return trace;
}

}  // namespace

const char *to_string(Algorithm algorithm) {
  return algorithm == Algorithm::q_learning ? "q_learning" : "actor_critic";
}

const char *to_string(ObservationMode mode) { return mode == ObservationMode::position ? "position" : "state"; }

void TrainingFamily::validate() const {
  if (tasks.empty()) throw std::invalid_argument("TrainingFamily: no tasks");
  const Index A = n_actions();
  const std::size_t N = n_stages();
  const double gamma = tasks.front().stack.base().gamma();
  for (const auto &task : tasks) {
    const Index S = task.stack.base().n_states();
    if (task.stack.base().n_actions() != A || task.stack.size() != N || task.stack.base().gamma() != gamma)
      throw std::invalid_argument("TrainingFamily: tasks disagree on actions, stages or discount");
    if (static_cast<Index>(task.observation.size()) != S || static_cast<Index>(task.outcome.size()) != S)
      throw std::invalid_argument("TrainingFamily: observation/outcome maps must cover every state");
    if (task.start_state < 0 || task.start_state >= S || task.stack.base().is_terminal(task.start_state))
      throw std::invalid_argument("TrainingFamily: invalid start state");
    for (Index s = 0; s < S; ++s) {
      const Index o = task.observation[static_cast<std::size_t>(s)];
      const bool terminal = task.stack.base().is_terminal(s);
      if (terminal != (o < 0)) throw std::invalid_argument("TrainingFamily: only terminal states lack an observation");
      if (o >= n_observations) throw std::invalid_argument("TrainingFamily: observation index out of range");
    }
  }
}

TrainingFamily TrainingFamily::select_stages(const std::vector<std::size_t> &stages) const {
  TrainingFamily out;
  out.n_observations = n_observations;
  for (const auto &task : tasks)
    out.tasks.push_back({task.stack.select(stages), task.start_state, task.observation, task.outcome});
  return out;
}

TrainingFamily make_family(std::span<const gridnav::NavModel> models, const std::vector<int> &stages,
                           ObservationMode mode) {
  if (models.empty()) throw std::invalid_argument("make_family: no models");
  TrainingFamily family;
  Index offset = 0;
  for (const auto &model : models) {
    const int N = model.env().layout.grid_size;
    TrainingTask task{model.guidance(stages), model.start_state(), {}, {}};
    task.observation.assign(static_cast<std::size_t>(model.n_states()), -1);
    task.outcome.assign(static_cast<std::size_t>(model.n_states()), Outcome::none);
    for (Index s = 0; s < model.n_states(); ++s) {
      task.outcome[static_cast<std::size_t>(s)] = model.outcome_of(s);
      if (s >= model.n_live_states()) continue;
      const auto &cell = model.state(s).cell;
      task.observation[static_cast<std::size_t>(s)] =
          mode == ObservationMode::position ? offset + cell.row * N + cell.col : offset + s;
    }
    offset += mode == ObservationMode::position ? static_cast<Index>(N) * N : model.n_live_states();
    family.tasks.push_back(std::move(task));
  }
  family.n_observations = offset;
  family.validate();
  return family;
}

std::int64_t TrainerConfig::resolved_snapshot_every() const {
  return snapshot_every > 0 ? snapshot_every : std::max<std::int64_t>(1, total_steps / 200);
}

std::int64_t TrainerConfig::resolved_epsilon_decay_steps() const {
  return epsilon_decay_steps > 0 ? epsilon_decay_steps : std::max<std::int64_t>(1, total_steps / 3);
}

double TrainerConfig::epsilon_at(std::int64_t step) const {
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(resolved_epsilon_decay_steps()));
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void TrainerConfig::validate(const StageSchedule &schedule) const {
  if (!(learning_rate > 0 && actor_learning_rate > 0 && critic_learning_rate > 0))
    throw std::invalid_argument("TrainerConfig: learning rates must be positive");
  if (learning_rate_power < 0) throw std::invalid_argument("TrainerConfig: learning_rate_power must be >= 0");
  if (!(epsilon_start >= 0 && epsilon_start <= 1 && epsilon_end >= 0 && epsilon_end <= 1))
    throw std::invalid_argument("TrainerConfig: epsilon must lie in [0, 1]");
  if (!(temperature > 0)) throw std::invalid_argument("TrainerConfig: temperature must be positive");
  if (snapshot_every < 0 || epsilon_decay_steps < 0)
    throw std::invalid_argument("TrainerConfig: step counts must be non-negative");
  if (total_steps < schedule.last())
    throw std::invalid_argument("TrainerConfig: total_steps must be at least the last stage transition");
}

std::vector<Index> greedy_actions(const Eigen::MatrixXd &parameters) {
  std::vector<Index> out(static_cast<std::size_t>(parameters.rows()));
  for (Index o = 0; o < parameters.rows(); ++o) parameters.row(o).maxCoeff(&out[static_cast<std::size_t>(o)]);
  return out;
}

std::uint64_t parameter_digest(const Eigen::MatrixXd &parameters) {
  // FNV-1a over the raw bytes, row-major, plus the shape.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void *data, std::size_t n) {
    const auto *bytes = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t shape[2] = {parameters.rows(), parameters.cols()};
  mix(shape, sizeof(shape));
  for (Index r = 0; r < parameters.rows(); ++r)
    for (Index c = 0; c < parameters.cols(); ++c) {
      const double v = parameters(r, c);
      mix(&v, sizeof(v));
    }
  return h;
}

DeterministicPolicy policy_for(const TrainingTask &task, const Snapshot &snapshot) {
  DeterministicPolicy pi;
  pi.action.resize(task.observation.size(), 0);
  for (std::size_t s = 0; s < task.observation.size(); ++s)
    if (const Index o = task.observation[s]; o >= 0) pi.action[s] = snapshot.greedy.at(static_cast<std::size_t>(o));
  return pi;
}

TrainingTrace train(const TrainingFamily &family, const StageSchedule &schedule, const TrainerConfig &cfg) {
  family.validate();
  cfg.validate(schedule);
  if (schedule.size() != family.n_stages())
    throw std::invalid_argument("train: schedule length differs from the number of guidances");
  return cfg.algorithm == Algorithm::q_learning ? run<QLearner>(family, schedule, cfg)
                                                : run<ActorCritic>(family, schedule, cfg);
}

std::vector<AnchorTask> make_anchors(const TrainingFamily &family, std::size_t stage, double vi_tol) {
  std::vector<AnchorTask> out;
  for (const auto &task : family.tasks) {
    TabularMDP<double> mdp = task.stack.stage_mdp(stage);
    ValueFunction<double> v = value_iteration(mdp, vi_tol);
    out.push_back({std::move(mdp), std::move(v), task.observation});
  }
  return out;
}

std::optional<std::int64_t> convergence_step(const TrainingTrace &trace, std::span<const AnchorTask> anchors,
                                             double eps) {
  if (trace.snapshots.empty()) throw std::invalid_argument("convergence_step: trace has no snapshots");
  if (anchors.empty()) throw std::invalid_argument("convergence_step: no anchor MDPs");
  for (const Snapshot &snap : trace.snapshots) {
    bool converged = true;
    for (const AnchorTask &anchor : anchors) {
      DeterministicPolicy pi;
      pi.action.resize(anchor.observation.size(), 0);
      for (std::size_t s = 0; s < anchor.observation.size(); ++s)
        if (const Index o = anchor.observation[s]; o >= 0) pi.action[s] = snap.greedy.at(static_cast<std::size_t>(o));
      if (!is_eps_converged(anchor.mdp, pi, anchor.v_star, eps)) {
        converged = false;
        break;
      }
    }
    if (converged) return snap.step;
  }
  return std::nullopt;
}

std::optional<std::int64_t> convergence_step(const TrainingTrace &trace, const TabularMDP<double> &eval_mdp,
                                             double eps) {
  std::vector<Index> identity(static_cast<std::size_t>(eval_mdp.n_states()));
  for (Index s = 0; s < eval_mdp.n_states(); ++s) identity[static_cast<std::size_t>(s)] = s;
  const AnchorTask anchor{eval_mdp, value_iteration(eval_mdp), std::move(identity)};
  return convergence_step(trace, std::span<const AnchorTask>(&anchor, 1), eps);
}

void write_trace_csv(std::ostream &out, const TrainingTrace &trace) {
  out << "# msrl trace v1\nstep,episode_return,outcome,stage_index\n";
  for (const auto &e : trace.episodes)
    out << e.end_step << ',' << format_fixed(e.episode_return, 6) << ',' << gridnav::to_string(e.outcome) << ','
        << e.stage + 1 << '\n';
}

void write_policy_table(std::ostream &out, const Snapshot &snapshot) {
  out << "# step " << snapshot.step << " digest " << snapshot.digest << '\n';
  out << "observation action\n";
  for (std::size_t o = 0; o < snapshot.greedy.size(); ++o) out << o << ' ' << snapshot.greedy[o] << '\n';
}

}  // namespace msrl
