#include "msrl/mdp.hpp"
#include "msrl/mdp_io.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace msrl;

namespace {

TabularMDP<double> self_loop(double reward, double gamma) {
  TransitionMatrix<double> P(1, 1);
  P.insert(0, 0) = 1.0;
  RewardTable<double> R(1, 1);
  R(0, 0) = reward;
  return TabularMDP<double>(P, R, gamma);
}

}  // namespace

TEST_CASE("construction rejects malformed models") {
  TransitionMatrix<double> P(2, 2);
  P.insert(0, 1) = 1.0;
  P.insert(1, 1) = 1.0;
  RewardTable<double> R = RewardTable<double>::Zero(2, 1);

  CHECK_NOTHROW(TabularMDP<double>(P, R, 0.5, {1}));
  CHECK_THROWS_AS(TabularMDP<double>(P, R, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TabularMDP<double>(P, R, -0.1), std::invalid_argument);

  RewardTable<double> wrong = RewardTable<double>::Zero(3, 1);
  CHECK_THROWS_AS(TabularMDP<double>(P, wrong, 0.5), std::invalid_argument);

  TransitionMatrix<double> short_row(2, 2);
  short_row.insert(0, 1) = 0.5;
  short_row.insert(1, 1) = 1.0;
  CHECK_THROWS_AS(TabularMDP<double>(short_row, R, 0.5), std::invalid_argument);

  TransitionMatrix<double> negative(2, 2);
  negative.insert(0, 0) = -0.5;
  negative.insert(0, 1) = 1.5;
  negative.insert(1, 1) = 1.0;
  CHECK_THROWS_AS(TabularMDP<double>(negative, R, 0.5), std::invalid_argument);

  SUBCASE("terminals self-loop with zero reward") {
    CHECK_THROWS_AS(TabularMDP<double>(P, R, 0.5, {0}), std::invalid_argument);
    RewardTable<double> paid = R;
    paid(1, 0) = 1.0;
    CHECK_THROWS_AS(TabularMDP<double>(P, paid, 0.5, {1}), std::invalid_argument);
  }
  SUBCASE("non-finite rewards") {
    RewardTable<double> bad = R;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(TabularMDP<double>(P, bad, 0.5), std::invalid_argument);
  }
}

TEST_CASE("value iteration on the three-state chain") {
  const auto mdp = oracle::chain_mdp();
  const auto v = value_iteration(mdp, 1e-9);
  CHECK(std::abs(v(0) - 0.81) <= 1e-9);
  CHECK(std::abs(v(1) - 0.9) <= 1e-9);
  CHECK(v(2) == 0.0);
  CHECK(((oracle::bellman_backup_loops(mdp, v) - v).cwiseAbs().maxCoeff() <= 1e-9));

  // Crediting the entry reward on the move itself instead gives (0.9, 1, 0).
  RewardTable<double> same_step = RewardTable<double>::Zero(3, 1);
  same_step(1, 0) = 1.0;
  const auto w = value_iteration(mdp.with_rewards(same_step), 1e-9);
  CHECK(std::abs(w(0) - 0.9) <= 1e-9);
  CHECK(std::abs(w(1) - 1.0) <= 1e-9);
}

TEST_CASE("value iteration closed forms") {
  CHECK(std::abs(value_iteration(self_loop(1.0, 0.5))(0) - 2.0) <= 1e-9);

  Rng rng(7);
  const auto random = oracle::random_mdp(rng, 12, 3, 0.9, 2);
  const auto zero = random.with_rewards(RewardTable<double>::Zero(12, 3));
  CHECK(value_iteration(zero).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(value_iteration(zero, 0.0), std::invalid_argument);
}

TEST_CASE("policy evaluation") {
  const auto chain = oracle::two_action_chain();
  const auto v_star = value_iteration(chain, 1e-9);

  SUBCASE("optimal chain policy matches value iteration within 2 tol") {
    const DeterministicPolicy forward{{0, 0, 0}};
    CHECK((policy_evaluation(chain, forward, 1e-9) - v_star).cwiseAbs().maxCoeff() <= 2e-9);
  }
  SUBCASE("a policy that never reaches the reward is worth nothing") {
    const DeterministicPolicy back{{1, 1, 0}};
    CHECK(policy_evaluation(chain, back, 1e-9).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("self loop") {
    const auto v = policy_evaluation(self_loop(1.0, 0.9), DeterministicPolicy{{0}}, 1e-10);
    CHECK(std::abs(v(0) - 10.0) <= 1e-9);
  }
  SUBCASE("bad policies are rejected") {
    CHECK_THROWS_AS(policy_evaluation(chain, DeterministicPolicy{{0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(policy_evaluation(chain, DeterministicPolicy{{0, 2, 0}}), std::invalid_argument);
  }
}

TEST_CASE("optimal policy sets") {
  SUBCASE("unique best actions give singletons") {
    const auto set = optimal_policy_set(oracle::two_action_chain());
    CHECK(set.per_state_actions[0] == std::vector<Index>{0});
    CHECK(set.per_state_actions[1] == std::vector<Index>{0});
    // The absorbing state has two identical actions.
    CHECK(set.per_state_actions[2] == std::vector<Index>{0, 1});
  }
  SUBCASE("duplicate actions are both optimal") {
    Rng rng(3);
    const auto base = oracle::random_mdp(rng, 8, 1, 0.9, 1);
    std::vector<Eigen::Triplet<double>> trips;
    for (Index r = 0; r < base.transitions().outerSize(); ++r)
      for (TransitionMatrix<double>::InnerIterator it(base.transitions(), r); it; ++it) {
        trips.emplace_back(2 * r, it.col(), it.value());
        trips.emplace_back(2 * r + 1, it.col(), it.value());
      }
    TransitionMatrix<double> P(16, 8);
    P.setFromTriplets(trips.begin(), trips.end());
    RewardTable<double> R(8, 2);
    R.col(0) = base.rewards().col(0);
    R.col(1) = base.rewards().col(0);
    const auto set = optimal_policy_set(TabularMDP<double>(P, R, 0.9, {7}));
    for (const auto &acts : set.per_state_actions) CHECK(acts == std::vector<Index>{0, 1});
  }
  SUBCASE("zero rewards make every action optimal") {
    Rng rng(4);
    const auto mdp = oracle::random_mdp(rng, 10, 4, 0.95, 1);
    const auto set = optimal_policy_set(mdp.with_rewards(RewardTable<double>::Zero(10, 4)));
    for (const auto &acts : set.per_state_actions) CHECK(acts.size() == 4);
  }
  CHECK_THROWS_AS(optimal_policy_set(oracle::chain_mdp(), 0.0), std::invalid_argument);
}

TEST_CASE("eps-convergence test") {
  const auto chain = oracle::two_action_chain();
  const auto v_star = value_iteration(chain);
  CHECK(is_eps_converged(chain, DeterministicPolicy{{0, 0, 0}}, v_star, 1e-3));
  // Stepping away at s0 loses the whole 0.81.
  CHECK_FALSE(is_eps_converged(chain, DeterministicPolicy{{1, 0, 0}}, v_star, 0.5));
  CHECK_THROWS_AS(is_eps_converged(chain, DeterministicPolicy{{0, 0, 0}}, v_star,
                                   std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(is_eps_converged(chain, DeterministicPolicy{{0, 0, 0}}, v_star, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(is_eps_converged(chain, DeterministicPolicy{{0, 0, 0}}, Vector<double>(Vector<double>::Zero(2)), 0.1),
                  std::invalid_argument);
}

TEST_CASE("random MDP properties") {
  Rng rng(20240611);
  for (int trial = 0; trial < 40; ++trial) {
    CAPTURE(trial);
    const Index S = 2 + static_cast<Index>(uniform_index(rng, 30));
    const Index A = 1 + static_cast<Index>(uniform_index(rng, 4));
    const double gamma = 0.5 + 0.45 * uniform_real(rng);
    const auto mdp = oracle::random_mdp(rng, S, A, gamma, static_cast<Index>(uniform_index(rng, 3)) % S);
    const double tol = 1e-9;
    const auto v = value_iteration(mdp, tol);

    // Contraction certificate against an independent backup.
    CHECK((oracle::bellman_backup_loops(mdp, v) - v).cwiseAbs().maxCoeff() <= tol);
    // q_values agrees with the loop form.
    CHECK((q_values(mdp, v) - oracle::q_loops(mdp, v)).cwiseAbs().maxCoeff() <= 1e-12);

    // Greedy consistency.
    const auto greedy = greedy_policy(mdp, v);
    CHECK((policy_evaluation(mdp, greedy, tol) - v).cwiseAbs().maxCoeff() <= 2 * tol / (1 - gamma) + 1e-12);
    CHECK((oracle::direct_policy_value(mdp, greedy.action) - v).cwiseAbs().maxCoeff() <= 2 * tol / (1 - gamma) + 1e-9);

    // Any member of the optimal set is near-optimal.
    const double tie_tol = 1e-6;
    const auto set = optimal_policy_set(mdp, tie_tol, tol);
    std::vector<Index> pick;
    for (const auto &acts : set.per_state_actions) {
      REQUIRE_FALSE(acts.empty());
      pick.push_back(acts[uniform_index(rng, acts.size())]);
    }
    CHECK((oracle::direct_policy_value(mdp, pick) - v).cwiseAbs().maxCoeff() <= tie_tol / (1 - gamma) + 1e-8);

    // Determinism.
    CHECK(value_iteration(mdp, tol) == v);
  }
}

TEST_CASE("value iteration matches exhaustive policy search") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = oracle::random_mdp(rng, 5, 3, 0.8, 1);
    CHECK((value_iteration(mdp, 1e-11) - oracle::brute_force_optimal_values(mdp)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("float scalar instantiation") {
  TransitionMatrix<float> P(3, 3);
  P.insert(0, 1) = 1.0f;
  P.insert(1, 2) = 1.0f;
  P.insert(2, 2) = 1.0f;
  RewardTable<float> R = RewardTable<float>::Zero(3, 1);
  R(1, 0) = 0.9f;
  const TabularMDP<float> mdp(P, R, 0.9f, {2});
  const auto v = value_iteration(mdp, 1e-6f);
  CHECK(std::abs(v(0) - 0.81f) <= 1e-5f);
}

TEST_CASE("text format") {
  std::ifstream golden(MSRL_TEST_DATA_DIR "/chain.mdp");
  REQUIRE(golden);
  const auto mdp = read_mdp_text(golden);
  const auto chain = oracle::chain_mdp();
  CHECK(mdp.n_states() == 3);
  CHECK(mdp.gamma() == 0.9);
  CHECK(mdp.terminal_states() == std::vector<Index>{2});
  CHECK(Eigen::MatrixXd(mdp.transitions()) == Eigen::MatrixXd(chain.transitions()));
  CHECK(mdp.rewards() == chain.rewards());

  SUBCASE("round trip preserves every number") {
    Rng rng(5);
    const auto random = oracle::random_mdp(rng, 9, 3, 0.97, 2);
    std::stringstream buf;
    write_mdp_text(buf, random);
    const auto back = read_mdp_text(buf);
    CHECK(Eigen::MatrixXd(back.transitions()) == Eigen::MatrixXd(random.transitions()));
    CHECK(back.rewards() == random.rewards());
    CHECK(back.gamma() == random.gamma());
    CHECK(back.terminal_states() == random.terminal_states());
  }
  SUBCASE("malformed input") {
    std::istringstream no_header("terminal 0\n1 0\n");
    CHECK_THROWS_AS(read_mdp_text(no_header), std::invalid_argument);
    std::istringstream short_rows("mdp 2 1 0.9\nterminal 0\n0 1 0\n");
    CHECK_THROWS_AS(read_mdp_text(short_rows), std::invalid_argument);
    std::istringstream bad_number("mdp 1 1 0.9\nterminal 0\n1 x\n");
    CHECK_THROWS_AS(read_mdp_text(bad_number), std::invalid_argument);
  }
}
