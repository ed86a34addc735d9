#pragma once

// Gridworld analog of a four-object navigation task: the agent starts at the
// center, one object is the goal, the others end the episode with a penalty.

#include "msrl/guidance.hpp"
#include "msrl/mdp.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msrl::gridnav {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell &) const = default;
};

enum class Metric { chebyshev, manhattan, euclidean };

/// Distance in cells between two grid cells.
double proximity(Cell a, Cell b, Metric metric = Metric::chebyshev);

enum class Action : int { up = 0, down = 1, left = 2, right = 3 };
inline constexpr int kActionCount = 4;
inline constexpr int kObjectCount = 4;

struct LayoutSpec {
  int level = 1;
  int grid_size = 7;
  std::array<Cell, kObjectCount> objects{};
  int goal_index = 0;
  std::vector<Cell> walls;  ///< sorted; non-empty only for level 3
  std::uint64_t seed = 0;

  Cell start() const { return {grid_size / 2, grid_size / 2}; }
  Cell goal() const { return objects[static_cast<std::size_t>(goal_index)]; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < grid_size && c.col < grid_size; }
  bool is_wall(Cell c) const;
  /// Object index at c, or -1.
  int object_at(Cell c) const;

  bool operator==(const LayoutSpec &) const = default;
};

/// round(N * 200 / 700): the 200-unit proximity range on a 700-unit map, in cells.
int proximity_radius_for(int grid_size);
/// Objects never spawn closer than this to the start cell.
int exclusion_radius_for(int grid_size);
int default_time_limit(int level);

/// Level 1: fixed layout. Level 2: random objects. Level 3: random objects plus wall segments.
LayoutSpec make_level(int level, int grid_size, std::uint64_t seed);

/// Text grid: '.' empty, '#' wall, 'G' goal, 'O' other object, 'S' start; one row per line.
std::string render_layout(const LayoutSpec &layout);
LayoutSpec parse_layout(const std::string &text, int level, std::uint64_t seed = 0);

/// Breadth-first search from the start through free cells; objects are reachable
/// when some free reachable cell (or the start) is adjacent to them.
std::vector<bool> reachable_objects(const LayoutSpec &layout);

enum class BonusSemantics {
  one_time,  ///< proximity terms paid on the first step ending inside each region
  per_step,  ///< proximity terms paid on every step ending inside a region
};

struct RewardParams {
  double goal = 10.0;
  double non_goal = -1.0;
  double timeout = -0.1;
  double step = -0.01;
  double goal_bonus = 5.0;
  double non_goal_penalty = -5.0;
  BonusSemantics semantics = BonusSemantics::one_time;

  /// Same event rewards with the per-step and timeout terms removed.
  RewardParams shaping_only() const {
    RewardParams p = *this;
    p.step = 0.0;
    p.timeout = 0.0;
    return p;
  }
};

struct EnvOptions {
  std::optional<int> time_limit;  ///< default: 25 for levels 1-2, 37 for level 3
  Metric metric = Metric::chebyshev;
  RewardParams rewards;
  double gamma = 0.99;
};

struct GridNavEnv {
  LayoutSpec layout;
  int time_limit = 25;
  int proximity_radius = 2;
  int stage = 1;
  Metric metric = Metric::chebyshev;
  RewardParams rewards;
  double gamma = 0.99;

  static GridNavEnv make(LayoutSpec layout, int stage, const EnvOptions &options = {});

  bool near_object(Cell c, int object) const;
};

struct NavState {
  Cell cell;
  int steps_left = 0;
  bool goal_bonus_taken = false;
  std::array<bool, kObjectCount - 1> non_goal_flags{};  ///< non-goal objects in layout order

  auto operator<=>(const NavState &) const = default;
};

enum class Outcome { none, goal, non_goal, timeout };
const char *to_string(Outcome outcome);

NavState initial_state(const GridNavEnv &env);
/// Cell after a move: blocked by the border and by walls.
Cell move(const LayoutSpec &layout, Cell cell, Action action);
/// Successor state (flags updated, clock decremented) and the episode outcome it implies.
std::pair<NavState, Outcome> transition(const GridNavEnv &env, const NavState &state, Action action);
/// Reward of one transition under env.stage.
double stage_reward(const GridNavEnv &env, const NavState &state, Action action, const NavState &next);

/// Rollout simulator over NavState.
class Simulator {
 public:
  explicit Simulator(GridNavEnv env) : env_(std::move(env)) { reset(); }

  struct Step {
    NavState state;
    double reward = 0.0;
    bool done = false;
    Outcome outcome = Outcome::none;
  };

  const NavState &reset();
  Step step(Action action);
  const NavState &state() const { return state_; }
  bool done() const { return done_; }
  const GridNavEnv &env() const { return env_; }

 private:
  GridNavEnv env_;
  NavState state_;
  bool done_ = false;
};

/// Exact finite model over reachable NavStates. Flags of stages above
/// `flag_stage` are not tracked (always false). Three absorbing terminal
/// states follow the non-terminal states: goal, non-goal, timeout.
class NavModel {
 public:
  static constexpr std::size_t kDefaultStateCap = 500'000;

  NavModel(GridNavEnv env, int flag_stage, std::size_t state_cap = kDefaultStateCap);

  const GridNavEnv &env() const { return env_; }
  int flag_stage() const { return flag_stage_; }
  Index n_states() const { return static_cast<Index>(states_.size()) + 3; }
  Index n_live_states() const { return static_cast<Index>(states_.size()); }
  Index start_state() const { return 0; }
  Index goal_terminal() const { return n_live_states(); }
  Index non_goal_terminal() const { return n_live_states() + 1; }
  Index timeout_terminal() const { return n_live_states() + 2; }
  Outcome outcome_of(Index s) const;

  const NavState &state(Index s) const { return states_.at(static_cast<std::size_t>(s)); }
  /// Index of a live state after dropping untracked flags, or -1 if it is not in the model.
  Index index_of(const NavState &state) const;
  Index next(Index s, Action a) const { return next_[static_cast<std::size_t>(s)][static_cast<int>(a)]; }

  /// Reward table for `stage` (<= flag_stage) under the given reward parameters.
  RewardTable<double> reward_table(int stage, const RewardParams &params) const;
  RewardTable<double> reward_table(int stage) const { return reward_table(stage, env_.rewards); }
  TabularMDP<double> mdp(int stage) const;
  /// Guidance stack over this model's state space, one table per listed stage.
  GuidanceStack<double> guidance(const std::vector<int> &stages, bool shaping_only = false) const;

 private:
  NavState canonical(NavState s) const;
  std::size_t key(const NavState &s) const;

  GridNavEnv env_;
  int flag_stage_;
  std::vector<NavState> states_;
  std::vector<std::array<Index, kActionCount>> next_;
  std::vector<Index> lookup_;
  TransitionMatrix<double> transitions_;
};

/// Compile env at its own stage: flags collapse to what that stage needs.
TabularMDP<double> to_tabular(const GridNavEnv &env, std::size_t state_cap = NavModel::kDefaultStateCap);

using NavPolicy = std::function<Action(std::size_t env_index, const NavState &state)>;

/// Fraction of episodes ending at the goal under `policy`, rewards ignored.
double success_rate(std::span<const GridNavEnv> envs, const NavPolicy &policy, int episodes_per_env = 1);
/// Uniformly random action baseline, Monte-Carlo estimate.
double random_success_rate(std::span<const GridNavEnv> envs, int episodes, std::uint64_t seed);

}  // namespace msrl::gridnav
