#include "msrl/gridnav.hpp"

#include "msrl/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace msrl::gridnav {

namespace {

constexpr std::array<Cell, kActionCount> kMoves{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

// Object index of the k-th non-goal object (layout order, goal skipped).
int non_goal_object(const LayoutSpec &layout, int k) {
  return k < layout.goal_index ? k : k + 1;
}

void check_grid_size(int grid_size) {
  if (grid_size < 5 || grid_size % 2 == 0)
    throw std::invalid_argument("gridnav: grid size must be odd and at least 5");
}

std::vector<Cell> sample_objects(const LayoutSpec &layout, Rng &rng) {
  const int N = layout.grid_size;
  const int exclusion = exclusion_radius_for(N);
  std::vector<Cell> candidates;
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      if (proximity({r, c}, layout.start()) >= exclusion) candidates.push_back({r, c});
  if (candidates.size() < static_cast<std::size_t>(kObjectCount))
    throw std::runtime_error("make_level: too few cells outside the exclusion radius");
  for (std::size_t i = 0; i < static_cast<std::size_t>(kObjectCount); ++i) {
    const auto j = i + uniform_index(rng, candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(kObjectCount);
  return candidates;
}

std::vector<Cell> sample_walls(const LayoutSpec &layout, Rng &rng) {
  const int N = layout.grid_size;
  const int segments = std::max(1, N / 3);
  const int max_len = std::max(2, N / 2);
  std::vector<Cell> walls;
  for (int k = 0; k < segments; ++k) {
    const bool horizontal = uniform_index(rng, 2) == 0;
    const int len = 2 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_len - 1)));
    const int span = N - len + 1;
    Cell origin;
    if (horizontal) {
      origin = {static_cast<int>(uniform_index(rng, N)), static_cast<int>(uniform_index(rng, span))};
    } else {
      origin = {static_cast<int>(uniform_index(rng, span)), static_cast<int>(uniform_index(rng, N))};
    }
    for (int i = 0; i < len; ++i) {
      const Cell c = horizontal ? Cell{origin.row, origin.col + i} : Cell{origin.row + i, origin.col};
      if (c == layout.start() || layout.object_at(c) >= 0) continue;
      walls.push_back(c);
    }
  }
  std::sort(walls.begin(), walls.end());
  walls.erase(std::unique(walls.begin(), walls.end()), walls.end());
  return walls;
}

}  // namespace

double proximity(Cell a, Cell b, Metric metric) {
  const int dr = std::abs(a.row - b.row);
  const int dc = std::abs(a.col - b.col);
  switch (metric) {
    case Metric::chebyshev: return std::max(dr, dc);
    case Metric::manhattan: return dr + dc;
    case Metric::euclidean: return std::sqrt(static_cast<double>(dr * dr + dc * dc));
  }
  return 0.0;
}

bool LayoutSpec::is_wall(Cell c) const { return std::binary_search(walls.begin(), walls.end(), c); }

int LayoutSpec::object_at(Cell c) const {
  for (int i = 0; i < kObjectCount; ++i)
    if (objects[static_cast<std::size_t>(i)] == c) return i;
  return -1;
}

int proximity_radius_for(int grid_size) {
  return static_cast<int>(std::lround(grid_size * 200.0 / 700.0));
}

int exclusion_radius_for(int grid_size) { return proximity_radius_for(grid_size) + 1; }

int default_time_limit(int level) { return level == 3 ? 37 : 25; }

LayoutSpec make_level(int level, int grid_size, std::uint64_t seed) {
  check_grid_size(grid_size);
  LayoutSpec layout;
  layout.level = level;
  layout.grid_size = grid_size;

  if (level == 1) {
    // Diagonal cells at exactly the exclusion radius from the start.
    const int near = grid_size / 2 - exclusion_radius_for(grid_size);
    const int far = grid_size - 1 - near;
    layout.objects = {Cell{near, near}, Cell{near, far}, Cell{far, near}, Cell{far, far}};
    layout.goal_index = 0;
    return layout;
  }
  if (level != 2 && level != 3) throw std::invalid_argument("make_level: level must be 1, 2 or 3");

  layout.seed = seed;
  Rng rng(mix_seed(seed, 0x6c61796f7574ULL));
  const auto objects = sample_objects(layout, rng);
  std::copy(objects.begin(), objects.end(), layout.objects.begin());
  layout.goal_index = static_cast<int>(uniform_index(rng, kObjectCount));
  if (level == 2) return layout;

  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    layout.walls = sample_walls(layout, rng);
    const auto reach = reachable_objects(layout);
    if (std::all_of(reach.begin(), reach.end(), [](bool b) { return b; })) return layout;
  }
  throw std::runtime_error("make_level: could not place walls without disconnecting objects");
}

std::vector<bool> reachable_objects(const LayoutSpec &layout) {
  const int N = layout.grid_size;
  std::vector<bool> seen(static_cast<std::size_t>(N * N), false);
  auto id = [N](Cell c) { return static_cast<std::size_t>(c.row * N + c.col); };
  std::deque<Cell> queue{layout.start()};
  seen[id(layout.start())] = true;
  std::vector<bool> reached(kObjectCount, false);
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (const Cell &d : kMoves) {
      const Cell n{c.row + d.row, c.col + d.col};
      if (!layout.in_bounds(n) || layout.is_wall(n)) continue;
      if (const int obj = layout.object_at(n); obj >= 0) {
        reached[static_cast<std::size_t>(obj)] = true;
        continue;
      }
      if (!seen[id(n)]) {
        seen[id(n)] = true;
        queue.push_back(n);
      }
    }
  }
  return reached;
}

std::string render_layout(const LayoutSpec &layout) {
  std::string out;
  for (int r = 0; r < layout.grid_size; ++r) {
    for (int c = 0; c < layout.grid_size; ++c) {
      const Cell cell{r, c};
      char ch = '.';
      if (cell == layout.start()) ch = 'S';
      else if (layout.is_wall(cell)) ch = '#';
      else if (const int obj = layout.object_at(cell); obj >= 0) ch = obj == layout.goal_index ? 'G' : 'O';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

LayoutSpec parse_layout(const std::string &text, int level, std::uint64_t seed) {
  std::istringstream in(text);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(line);
  const int N = static_cast<int>(rows.size());
  check_grid_size(N);

  LayoutSpec layout;
  layout.level = level;
  layout.grid_size = N;
  layout.seed = seed;
  int n_objects = 0;
  int n_goals = 0;
  bool saw_start = false;
  for (int r = 0; r < N; ++r) {
    if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != N)
      throw std::invalid_argument("parse_layout: grid must be square");
    for (int c = 0; c < N; ++c) {
      switch (rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
        case '.': break;
        case '#': layout.walls.push_back({r, c}); break;
        case 'S':
          if (Cell{r, c} != layout.start()) throw std::invalid_argument("parse_layout: start must be the center");
          saw_start = true;
          break;
        case 'G':
          ++n_goals;
          layout.goal_index = n_objects;
          [[fallthrough]];
        case 'O':
          if (n_objects == kObjectCount) throw std::invalid_argument("parse_layout: more than four objects");
          layout.objects[static_cast<std::size_t>(n_objects++)] = {r, c};
          break;
        default: throw std::invalid_argument("parse_layout: unknown cell character");
      }
    }
  }
  if (!saw_start || n_objects != kObjectCount || n_goals != 1)
    throw std::invalid_argument("parse_layout: need one start, one goal and three other objects");
  std::sort(layout.walls.begin(), layout.walls.end());
  return layout;
}

GridNavEnv GridNavEnv::make(LayoutSpec layout, int stage, const EnvOptions &options) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("GridNavEnv: stage must be 1, 2 or 3");
  GridNavEnv env;
  env.time_limit = options.time_limit.value_or(default_time_limit(layout.level));
  if (env.time_limit < 1) throw std::invalid_argument("GridNavEnv: time limit must be positive");
  env.proximity_radius = proximity_radius_for(layout.grid_size);
  env.layout = std::move(layout);
  env.stage = stage;
  env.metric = options.metric;
  env.rewards = options.rewards;
  env.gamma = options.gamma;
  return env;
}

bool GridNavEnv::near_object(Cell c, int object) const {
  return proximity(c, layout.objects[static_cast<std::size_t>(object)], metric) <= proximity_radius;
}

const char *to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::none: return "none";
    case Outcome::goal: return "goal";
    case Outcome::non_goal: return "non_goal";
    case Outcome::timeout: return "timeout";
  }
  return "none";
}

NavState initial_state(const GridNavEnv &env) {
  NavState s;
  s.cell = env.layout.start();
  s.steps_left = env.time_limit;
  return s;
}

Cell move(const LayoutSpec &layout, Cell cell, Action action) {
  const Cell d = kMoves[static_cast<std::size_t>(action)];
  const Cell n{cell.row + d.row, cell.col + d.col};
  if (!layout.in_bounds(n) || layout.is_wall(n)) return cell;
  return n;
}

std::pair<NavState, Outcome> transition(const GridNavEnv &env, const NavState &state, Action action) {
  NavState next = state;
  next.cell = move(env.layout, state.cell, action);
  next.steps_left = state.steps_left - 1;
  next.goal_bonus_taken = state.goal_bonus_taken || env.near_object(next.cell, env.layout.goal_index);
  for (int k = 0; k < kObjectCount - 1; ++k)
    next.non_goal_flags[static_cast<std::size_t>(k)] =
        state.non_goal_flags[static_cast<std::size_t>(k)] ||
        env.near_object(next.cell, non_goal_object(env.layout, k));

  Outcome outcome = Outcome::none;
  if (const int obj = env.layout.object_at(next.cell); obj >= 0)
    outcome = obj == env.layout.goal_index ? Outcome::goal : Outcome::non_goal;
  else if (next.steps_left <= 0)
    outcome = Outcome::timeout;
  return {next, outcome};
}

double stage_reward(const GridNavEnv &env, const NavState &state, Action action, const NavState &next) {
  (void)action;
  const RewardParams &p = env.rewards;
  const bool per_step = p.semantics == BonusSemantics::per_step;
  double r = p.step;
  if (const int obj = env.layout.object_at(next.cell); obj >= 0)
    r += obj == env.layout.goal_index ? p.goal : p.non_goal;
  else if (next.steps_left <= 0)
    r += p.timeout;

  if (env.stage >= 2 && env.near_object(next.cell, env.layout.goal_index) &&
      (per_step || !state.goal_bonus_taken))
    r += p.goal_bonus;
  if (env.stage >= 3) {
    for (int k = 0; k < kObjectCount - 1; ++k)
      if (env.near_object(next.cell, non_goal_object(env.layout, k)) &&
          (per_step || !state.non_goal_flags[static_cast<std::size_t>(k)]))
        r += p.non_goal_penalty;
  }
  return r;
}

const NavState &Simulator::reset() {
  state_ = initial_state(env_);
  done_ = false;
  return state_;
}

Simulator::Step Simulator::step(Action action) {
  if (done_) throw std::logic_error("Simulator::step: episode already finished");
  auto [next, outcome] = transition(env_, state_, action);
  Step out;
  out.reward = stage_reward(env_, state_, action, next);
  out.state = next;
  out.outcome = outcome;
  out.done = outcome != Outcome::none;
  state_ = next;
  done_ = out.done;
  return out;
}

NavModel::NavModel(GridNavEnv env, int flag_stage, std::size_t state_cap)
    : env_(std::move(env)), flag_stage_(flag_stage) {
  if (flag_stage < 1 || flag_stage > 3) throw std::invalid_argument("NavModel: flag stage must be 1, 2 or 3");
  const int N = env_.layout.grid_size;
  lookup_.assign(static_cast<std::size_t>(N * N * (env_.time_limit + 1) * 16), -1);

  // Terminal successors are encoded as negative placeholders until the live count is known.
  constexpr Index kGoal = -1, kNonGoal = -2, kTimeout = -3;
  const NavState start = canonical(initial_state(env_));
  states_.push_back(start);
  lookup_[key(start)] = 0;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    std::array<Index, kActionCount> succ{};
    for (int a = 0; a < kActionCount; ++a) {
      auto [raw, outcome] = transition(env_, states_[i], static_cast<Action>(a));
      if (outcome == Outcome::goal) succ[static_cast<std::size_t>(a)] = kGoal;
      else if (outcome == Outcome::non_goal) succ[static_cast<std::size_t>(a)] = kNonGoal;
      else if (outcome == Outcome::timeout) succ[static_cast<std::size_t>(a)] = kTimeout;
      else {
        const NavState n = canonical(raw);
        Index &slot = lookup_[key(n)];
        if (slot < 0) {
          if (states_.size() >= state_cap)
            throw std::runtime_error("NavModel: state space exceeds the cap of " + std::to_string(state_cap));
          slot = static_cast<Index>(states_.size());
          states_.push_back(n);
        }
        succ[static_cast<std::size_t>(a)] = slot;
      }
    }
    next_.push_back(succ);
  }

  for (auto &succ : next_)
    for (Index &t : succ)
      if (t == kGoal) t = goal_terminal();
      else if (t == kNonGoal) t = non_goal_terminal();
      else if (t == kTimeout) t = timeout_terminal();

  const Index S = n_states();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(S * kActionCount));
  for (Index s = 0; s < S; ++s)
    for (int a = 0; a < kActionCount; ++a)
      entries.emplace_back(s * kActionCount + a, s < n_live_states() ? next_[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] : s, 1.0);
  transitions_.resize(S * kActionCount, S);
  transitions_.setFromTriplets(entries.begin(), entries.end());
}

NavState NavModel::canonical(NavState s) const {
  if (flag_stage_ < 2) s.goal_bonus_taken = false;
  if (flag_stage_ < 3) s.non_goal_flags.fill(false);
  return s;
}

std::size_t NavModel::key(const NavState &s) const {
  const int N = env_.layout.grid_size;
  std::size_t flags = s.goal_bonus_taken ? 1u : 0u;
  for (std::size_t k = 0; k < s.non_goal_flags.size(); ++k)
    if (s.non_goal_flags[k]) flags |= 2u << k;
  const auto cell = static_cast<std::size_t>(s.cell.row * N + s.cell.col);
  return (cell * static_cast<std::size_t>(env_.time_limit + 1) + static_cast<std::size_t>(s.steps_left)) * 16 + flags;
}

Index NavModel::index_of(const NavState &state) const {
  if (!env_.layout.in_bounds(state.cell) || state.steps_left < 0 || state.steps_left > env_.time_limit) return -1;
  return lookup_[key(canonical(state))];
}

Outcome NavModel::outcome_of(Index s) const {
  if (s == goal_terminal()) return Outcome::goal;
  if (s == non_goal_terminal()) return Outcome::non_goal;
  if (s == timeout_terminal()) return Outcome::timeout;
  return Outcome::none;
}

RewardTable<double> NavModel::reward_table(int stage, const RewardParams &params) const {
  if (stage < 1 || stage > flag_stage_)
    throw std::invalid_argument("NavModel::reward_table: stage must be between 1 and the tracked flag stage");
  GridNavEnv env = env_;
  env.stage = stage;
  env.rewards = params;
  RewardTable<double> table = RewardTable<double>::Zero(n_states(), kActionCount);
  for (Index s = 0; s < n_live_states(); ++s) {
    const NavState &cur = states_[static_cast<std::size_t>(s)];
    for (int a = 0; a < kActionCount; ++a) {
      const auto action = static_cast<Action>(a);
      table(s, a) = stage_reward(env, cur, action, transition(env, cur, action).first);
    }
  }
  return table;
}

TabularMDP<double> NavModel::mdp(int stage) const {
  return TabularMDP<double>(transitions_, reward_table(stage), env_.gamma,
                            {goal_terminal(), non_goal_terminal(), timeout_terminal()});
}

GuidanceStack<double> NavModel::guidance(const std::vector<int> &stages, bool shaping_only) const {
  const RewardParams params = shaping_only ? env_.rewards.shaping_only() : env_.rewards;
  TabularMDP<double> base(transitions_, RewardTable<double>::Zero(n_states(), kActionCount), env_.gamma,
                          {goal_terminal(), non_goal_terminal(), timeout_terminal()});
  std::vector<RewardTable<double>> tables;
  for (int stage : stages) tables.push_back(reward_table(stage, params));
  return GuidanceStack<double>(std::move(base), std::move(tables));
}

TabularMDP<double> to_tabular(const GridNavEnv &env, std::size_t state_cap) {
  return NavModel(env, env.stage, state_cap).mdp(env.stage);
}

double success_rate(std::span<const GridNavEnv> envs, const NavPolicy &policy, int episodes_per_env) {
  if (envs.empty()) throw std::invalid_argument("success_rate: empty evaluation set");
  if (episodes_per_env < 1) throw std::invalid_argument("success_rate: need at least one episode per env");
  long successes = 0;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    GridNavEnv env = envs[i];
    env.stage = 1;
    Simulator sim(env);
    for (int e = 0; e < episodes_per_env; ++e) {
      sim.reset();
      Simulator::Step last;
      while (!sim.done()) last = sim.step(policy(i, sim.state()));
      if (last.outcome == Outcome::goal) ++successes;
    }
  }
  return static_cast<double>(successes) / static_cast<double>(envs.size() * static_cast<std::size_t>(episodes_per_env));
}

double random_success_rate(std::span<const GridNavEnv> envs, int episodes, std::uint64_t seed) {
  Rng rng(seed);
  return success_rate(
      envs, [&rng](std::size_t, const NavState &) { return static_cast<Action>(uniform_index(rng, kActionCount)); },
      episodes);
}

}  // namespace msrl::gridnav
