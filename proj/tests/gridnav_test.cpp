#include "msrl/gridnav.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace msrl;
using namespace msrl::gridnav;

namespace {

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char *kCorridor =
    "#####\n"
    "#G.O#\n"
    "#.S.#\n"
    "#O.O#\n"
    "#####\n";

}  // namespace

TEST_CASE("distances and radii") {
  CHECK(proximity({0, 0}, {2, 3}) == 3);
  CHECK(proximity({0, 0}, {2, 3}, Metric::manhattan) == 5);
  CHECK(proximity({0, 0}, {3, 4}, Metric::euclidean) == doctest::Approx(5.0));
  CHECK(proximity_radius_for(7) == 2);
  CHECK(proximity_radius_for(700) == 200);
  CHECK(exclusion_radius_for(7) == 3);
  CHECK(default_time_limit(1) == 25);
  CHECK(default_time_limit(2) == 25);
  CHECK(default_time_limit(3) == 37);
}

TEST_CASE("level 1 layout") {
  const auto layout = make_level(1, 7, 123);
  CHECK(render_layout(layout) == read_file(MSRL_TEST_DATA_DIR "/level1_7x7.txt"));
  CHECK(layout == make_level(1, 7, 0));
  CHECK_THROWS_AS(make_level(1, 6, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_level(4, 7, 0), std::invalid_argument);
}

TEST_CASE("random layouts") {
  for (int level : {2, 3}) {
    std::set<std::string> renders;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      CAPTURE(level);
      CAPTURE(seed);
      const auto layout = make_level(level, 7, seed);
      CHECK(layout == make_level(level, 7, seed));
      renders.insert(render_layout(layout));

      std::set<Cell> cells(layout.objects.begin(), layout.objects.end());
      CHECK(cells.size() == 4);
      for (const auto &o : layout.objects) {
        CHECK(layout.in_bounds(o));
        CHECK(proximity(o, layout.start()) >= exclusion_radius_for(7));
        CHECK_FALSE(layout.is_wall(o));
      }
      CHECK(layout.goal_index >= 0);
      CHECK(layout.goal_index < 4);
      CHECK_FALSE(layout.is_wall(layout.start()));
      if (level == 2) CHECK(layout.walls.empty());
      const auto reach = reachable_objects(layout);
      CHECK(std::all_of(reach.begin(), reach.end(), [](bool b) { return b; }));

      // Parsing numbers objects in reading order, so compare as sets.
      const auto parsed = parse_layout(render_layout(layout), level, seed);
      CHECK(std::set<Cell>(parsed.objects.begin(), parsed.objects.end()) == cells);
      CHECK(parsed.goal() == layout.goal());
      CHECK(parsed.walls == layout.walls);
      CHECK(render_layout(parsed) == render_layout(layout));
    }
    CHECK(renders.size() > 90);
  }
  CHECK(make_level(2, 9, 1).grid_size == 9);
}

TEST_CASE("layout parsing and reachability") {
  const auto layout = parse_layout(kCorridor, 3);
  CHECK(layout.walls.size() == 16);
  CHECK(layout.goal() == Cell{1, 1});
  CHECK(reachable_objects(layout) == std::vector<bool>{true, true, true, true});

  const auto boxed = parse_layout(
      "O...O\n"
      "..#..\n"
      ".#S#.\n"
      "..#..\n"
      "G...O\n",
      3);
  CHECK(reachable_objects(boxed) == std::vector<bool>{false, false, false, false});

  CHECK_THROWS_AS(parse_layout("G.O\n.S.\nO.O\n", 2), std::invalid_argument);
  CHECK_THROWS_AS(parse_layout("G...O\n.....\n..S..\n.....\nO...X\n", 2), std::invalid_argument);
  CHECK_THROWS_AS(parse_layout("O...O\n.....\n..S..\n.....\nO...O\n", 2), std::invalid_argument);
  CHECK_THROWS_AS(parse_layout("G...O\n.....\nS....\n.....\nO...O\n", 2), std::invalid_argument);
}

TEST_CASE("simulator dynamics and rewards") {
  EnvOptions opts;
  const auto layout = parse_layout(
      "G....\n"
      ".....\n"
      "..S..\n"
      ".....\n"
      "O.O.O\n",
      2);
  SUBCASE("stage 1 reaching the goal") {
    Simulator sim(GridNavEnv::make(layout, 1, opts));
    auto s = sim.step(Action::up);
    CHECK(s.state.cell == Cell{1, 2});
    CHECK(s.reward == doctest::Approx(-0.01));
    sim.step(Action::up);
    sim.step(Action::left);
    s = sim.step(Action::left);
    CHECK(s.done);
    CHECK(s.outcome == Outcome::goal);
    CHECK(s.reward == doctest::Approx(10.0 - 0.01));
    CHECK_THROWS_AS(sim.step(Action::up), std::logic_error);
  }
  SUBCASE("walls and borders block") {
    Simulator sim(GridNavEnv::make(parse_layout(kCorridor, 3), 1, opts));
    sim.step(Action::up);
    CHECK(sim.state().cell == Cell{1, 2});
    sim.step(Action::up);
    CHECK(sim.state().cell == Cell{1, 2});
  }
  SUBCASE("timeout") {
    opts.time_limit = 2;
    Simulator sim(GridNavEnv::make(layout, 3, opts));
    sim.step(Action::left);
    const auto s = sim.step(Action::right);
    CHECK(s.done);
    CHECK(s.outcome == Outcome::timeout);
  }
  SUBCASE("one-time proximity terms") {
    // Radius 1 on a 5x5 grid. The start is inside the regions of (4,2) only.
    Simulator sim(GridNavEnv::make(layout, 3, opts));
    auto s = sim.step(Action::left);  // (2,1): near (4,2)? no. Chebyshev 2.
    CHECK(s.reward == doctest::Approx(-0.01));
    s = sim.step(Action::down);  // (3,1): near (4,0) and (4,2)
    CHECK(s.reward == doctest::Approx(-0.01 - 10.0));
    s = sim.step(Action::up);  // (2,1)
    s = sim.step(Action::down);  // back in, already flagged
    CHECK(s.reward == doctest::Approx(-0.01));
    s = sim.step(Action::up);
    s = sim.step(Action::up);  // (1,1): near the goal
    CHECK(s.reward == doctest::Approx(-0.01 + 5.0));
  }
  SUBCASE("per-step proximity terms") {
    opts.rewards.semantics = BonusSemantics::per_step;
    Simulator sim(GridNavEnv::make(layout, 2, opts));
    sim.step(Action::up);
    auto s = sim.step(Action::left);  // (1,1)
    CHECK(s.reward == doctest::Approx(-0.01 + 5.0));
    s = sim.step(Action::down);  // (2,1): out
    s = sim.step(Action::up);  // (1,1) again
    CHECK(s.reward == doctest::Approx(-0.01 + 5.0));
  }
}

TEST_CASE("compiled model agrees with the simulator") {
  Rng rng(17);
  for (int level : {1, 2, 3})
    for (auto semantics : {BonusSemantics::one_time, BonusSemantics::per_step}) {
      EnvOptions opts;
      opts.rewards.semantics = semantics;
      const auto layout = make_level(level, 7, static_cast<std::uint64_t>(level) * 13);
      for (int stage = 1; stage <= 3; ++stage) {
        const auto env = GridNavEnv::make(layout, stage, opts);
        const NavModel model(env, 3);
        const auto mdp = model.mdp(stage);
        const auto compact = to_tabular(env);
        CHECK(compact.n_states() <= mdp.n_states());

        Simulator sim(env);
        for (int episode = 0; episode < 40; ++episode) {
          sim.reset();
          Index s = model.start_state();
          while (!sim.done()) {
            const auto a = static_cast<Action>(uniform_index(rng, kActionCount));
            const NavState before = sim.state();
            REQUIRE(model.index_of(before) == s);
            const auto step = sim.step(a);
            const Index next = model.next(s, a);
            CHECK(mdp.rewards()(s, static_cast<Index>(a)) == step.reward);
            CHECK(oracle::gridnav_event_reward(env, stage, before, a) == doctest::Approx(step.reward));
            CHECK(model.outcome_of(next) == step.outcome);
            if (!step.done) CHECK(model.state(next) == step.state);
            s = next;
          }
          CHECK(mdp.is_terminal(s));
        }
      }
    }
}

TEST_CASE("model structure") {
  const auto env = GridNavEnv::make(make_level(2, 7, 3), 3);
  const NavModel full(env, 3);
  const NavModel plain(env, 1);
  CHECK(plain.n_states() < full.n_states());
  CHECK(full.outcome_of(full.goal_terminal()) == Outcome::goal);
  CHECK(full.outcome_of(full.non_goal_terminal()) == Outcome::non_goal);
  CHECK(full.outcome_of(full.timeout_terminal()) == Outcome::timeout);
  CHECK(full.outcome_of(full.start_state()) == Outcome::none);
  CHECK(full.state(0) == initial_state(env));

  NavState flagged = initial_state(env);
  flagged.goal_bonus_taken = true;
  CHECK(plain.index_of(flagged) == plain.start_state());
  NavState outside = initial_state(env);
  outside.cell = {-1, 0};
  CHECK(full.index_of(outside) == -1);

  CHECK_THROWS_AS(plain.reward_table(2), std::invalid_argument);
  CHECK_THROWS_AS(NavModel(env, 3, 50), std::runtime_error);
  CHECK_THROWS_AS(NavModel(env, 0), std::invalid_argument);

  const auto stack = full.guidance({1, 3});
  CHECK(stack.size() == 2);
  CHECK(stack.rewards(1) == full.reward_table(3));
  CHECK(full.guidance({2}, true).rewards(0) == full.reward_table(2, env.rewards.shaping_only()));
}

TEST_CASE("success rate") {
  std::vector<GridNavEnv> envs;
  std::vector<NavModel> models;
  std::vector<DeterministicPolicy> policies;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    envs.push_back(GridNavEnv::make(make_level(3, 7, seed), 1));
    models.emplace_back(envs.back(), 1);
    const auto mdp = models.back().mdp(1);
    policies.push_back(greedy_policy(mdp, value_iteration(mdp)));
  }
  const NavPolicy optimal = [&](std::size_t i, const NavState &s) {
    return static_cast<Action>(policies[i][models[i].index_of(s)]);
  };
  CHECK(success_rate(envs, optimal) == 1.0);
  CHECK(success_rate(envs, optimal, 3) == 1.0);

  const double random = random_success_rate(envs, 200, 1);
  CHECK(random > 0.0);
  CHECK(random < 0.5);
  CHECK(random == random_success_rate(envs, 200, 1));
  CHECK_THROWS_AS(success_rate({}, optimal), std::invalid_argument);
}
