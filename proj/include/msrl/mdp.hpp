#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace msrl {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Rewards indexed (state, action); row-major so that row s holds R(s, .).
template <typename Scalar>
using RewardTable = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Transition kernel with one row per (state, action) pair, row index s * n_actions + a.
template <typename Scalar>
using TransitionMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

template <typename Scalar>
using ValueFunction = Vector<Scalar>;

/// A deterministic stationary policy: action[s] is the action taken in state s.
struct DeterministicPolicy {
  std::vector<Index> action;

  Index size() const { return static_cast<Index>(action.size()); }
  Index operator[](Index s) const { return action[static_cast<std::size_t>(s)]; }
  bool operator==(const DeterministicPolicy &) const = default;
};

/// Product set of deterministic policies: every policy choosing, in each
/// state, one of that state's allowed actions. Actions are kept sorted.
struct PolicySet {
  std::vector<std::vector<Index>> per_state_actions;

  Index n_states() const { return static_cast<Index>(per_state_actions.size()); }

  bool allows(Index s, Index a) const {
    const auto &acts = per_state_actions[static_cast<std::size_t>(s)];
    return std::binary_search(acts.begin(), acts.end(), a);
  }

  /// True iff this set contains every policy of `other` (per-state inclusion).
  bool includes(const PolicySet &other) const {
    if (other.n_states() != n_states()) return false;
    for (std::size_t s = 0; s < per_state_actions.size(); ++s) {
      const auto &mine = per_state_actions[s];
      const auto &theirs = other.per_state_actions[s];
      if (!std::includes(mine.begin(), mine.end(), theirs.begin(), theirs.end())) return false;
    }
    return true;
  }

  bool operator==(const PolicySet &) const = default;
};

/// Finite MDP <S, A, P, R, gamma>. Immutable; the transition kernel is shared
/// between copies and between MDPs derived with `with_rewards`.
template <typename Scalar = double>
class TabularMDP {
 public:
  TabularMDP(TransitionMatrix<Scalar> transitions, RewardTable<Scalar> rewards, Scalar gamma,
             std::vector<Index> terminal_states = {})
      : TabularMDP(std::make_shared<const TransitionMatrix<Scalar>>(std::move(transitions)),
                   std::move(rewards), gamma, std::move(terminal_states)) {}

  Index n_states() const { return rewards_.rows(); }
  Index n_actions() const { return rewards_.cols(); }
  Scalar gamma() const { return gamma_; }
  const TransitionMatrix<Scalar> &transitions() const { return *transitions_; }
  const RewardTable<Scalar> &rewards() const { return rewards_; }
  const std::vector<Index> &terminal_states() const { return terminal_; }

  bool is_terminal(Index s) const {
    return std::binary_search(terminal_.begin(), terminal_.end(), s);
  }

  Index row(Index s, Index a) const { return s * n_actions() + a; }

  /// Same dynamics and discount, different reward table.
  TabularMDP with_rewards(RewardTable<Scalar> rewards) const {
    return TabularMDP(transitions_, std::move(rewards), gamma_, terminal_);
  }

 private:
  TabularMDP(std::shared_ptr<const TransitionMatrix<Scalar>> transitions, RewardTable<Scalar> rewards,
             Scalar gamma, std::vector<Index> terminal)
      : transitions_(std::move(transitions)),
        rewards_(std::move(rewards)),
        gamma_(gamma),
        terminal_(std::move(terminal)) {
    std::sort(terminal_.begin(), terminal_.end());
    terminal_.erase(std::unique(terminal_.begin(), terminal_.end()), terminal_.end());
    validate();
  }

  void validate() const {
    const Index S = rewards_.rows();
    const Index A = rewards_.cols();
    if (S <= 0 || A <= 0) throw std::invalid_argument("TabularMDP: empty state or action space");
    if (!(gamma_ >= Scalar(0) && gamma_ < Scalar(1)))
      throw std::invalid_argument("TabularMDP: gamma must lie in [0, 1)");
    if (transitions_->rows() != S * A || transitions_->cols() != S)
      throw std::invalid_argument("TabularMDP: transition shape must be (S*A) x S");
    if (!rewards_.allFinite()) throw std::invalid_argument("TabularMDP: non-finite reward");

    const Scalar sum_tol =
        std::max<Scalar>(Scalar(1e-9), Scalar(64) * std::numeric_limits<Scalar>::epsilon());
    for (Index r = 0; r < transitions_->outerSize(); ++r) {
      Scalar sum = 0;
      for (typename TransitionMatrix<Scalar>::InnerIterator it(*transitions_, r); it; ++it) {
        if (!(it.value() >= Scalar(0)))
          throw std::invalid_argument("TabularMDP: negative transition probability in row " +
                                      std::to_string(r));
        sum += it.value();
      }
      if (std::abs(sum - Scalar(1)) > sum_tol)
        throw std::invalid_argument("TabularMDP: transition row " + std::to_string(r) +
                                    " does not sum to 1");
    }

    for (Index s : terminal_) {
      if (s < 0 || s >= S) throw std::invalid_argument("TabularMDP: terminal state out of range");
      for (Index a = 0; a < A; ++a) {
        if (rewards_(s, a) != Scalar(0))
          throw std::invalid_argument("TabularMDP: terminal state with nonzero reward");
        if (transitions_->coeff(row(s, a), s) != Scalar(1))
          throw std::invalid_argument("TabularMDP: terminal state must self-loop");
      }
    }
  }

  std::shared_ptr<const TransitionMatrix<Scalar>> transitions_;
  RewardTable<Scalar> rewards_;
  Scalar gamma_;
  std::vector<Index> terminal_;
};

namespace detail {

inline constexpr long kMaxSweeps = 10'000'000;

template <typename Scalar>
void check_tolerance(Scalar tol, const char *what) {
  if (!(tol > Scalar(0)) || !std::isfinite(tol))
    throw std::invalid_argument(std::string(what) + ": tolerance must be positive and finite");
}

template <typename Scalar>
void check_policy(const TabularMDP<Scalar> &mdp, const DeterministicPolicy &policy) {
  if (policy.size() != mdp.n_states())
    throw std::invalid_argument("policy length does not match the number of states");
  for (Index a : policy.action)
    if (a < 0 || a >= mdp.n_actions()) throw std::invalid_argument("policy action out of range");
}

}  // namespace detail

/// Q(s, a) = R(s, a) + gamma * sum_s' P(s' | s, a) v(s').
template <typename Scalar>
RewardTable<Scalar> q_values(const TabularMDP<Scalar> &mdp, const ValueFunction<Scalar> &v) {
  const Vector<Scalar> expected = mdp.transitions() * v;
  return mdp.rewards() +
         mdp.gamma() * Eigen::Map<const RewardTable<Scalar>>(expected.data(), mdp.n_states(),
                                                              mdp.n_actions());
}

/// Bellman optimality backup (T v)(s) = max_a Q(s, a).
template <typename Scalar>
ValueFunction<Scalar> bellman_backup(const TabularMDP<Scalar> &mdp, const ValueFunction<Scalar> &v) {
  return q_values(mdp, v).rowwise().maxCoeff();
}

/**
 * Jacobi value iteration from v = 0. Stops once successive iterates differ by
 * at most `tol` in sup-norm; the returned v then has Bellman residual
 * |T v - v| <= gamma * tol.
 */
template <typename Scalar>
ValueFunction<Scalar> value_iteration(const TabularMDP<Scalar> &mdp, Scalar tol = Scalar(1e-9)) {
  detail::check_tolerance(tol, "value_iteration");
  ValueFunction<Scalar> v = ValueFunction<Scalar>::Zero(mdp.n_states());
  for (long sweep = 0; sweep < detail::kMaxSweeps; ++sweep) {
    ValueFunction<Scalar> next = bellman_backup(mdp, v);
    const Scalar residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (residual <= tol) return v;
  }
  throw std::runtime_error("value_iteration: tolerance not reached (scalar precision too low?)");
}

/// Rows of P selected by a deterministic policy, as an S x S matrix.
template <typename Scalar>
TransitionMatrix<Scalar> policy_transitions(const TabularMDP<Scalar> &mdp,
                                            const DeterministicPolicy &policy) {
  const auto &P = mdp.transitions();
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(static_cast<std::size_t>(mdp.n_states()));
  for (Index s = 0; s < mdp.n_states(); ++s)
    for (typename TransitionMatrix<Scalar>::InnerIterator it(P, mdp.row(s, policy[s])); it; ++it)
      entries.emplace_back(s, it.col(), it.value());
  TransitionMatrix<Scalar> out(mdp.n_states(), mdp.n_states());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

template <typename Scalar>
Vector<Scalar> policy_rewards(const TabularMDP<Scalar> &mdp, const DeterministicPolicy &policy) {
  Vector<Scalar> r(mdp.n_states());
  for (Index s = 0; s < mdp.n_states(); ++s) r(s) = mdp.rewards()(s, policy[s]);
  return r;
}

/// Iterative evaluation of V^pi; same stopping rule as value_iteration.
template <typename Scalar>
ValueFunction<Scalar> policy_evaluation(const TabularMDP<Scalar> &mdp, const DeterministicPolicy &policy,
                                        Scalar tol = Scalar(1e-9)) {
  detail::check_tolerance(tol, "policy_evaluation");
  detail::check_policy(mdp, policy);
  const TransitionMatrix<Scalar> P = policy_transitions(mdp, policy);
  const Vector<Scalar> r = policy_rewards(mdp, policy);
  ValueFunction<Scalar> v = ValueFunction<Scalar>::Zero(mdp.n_states());
  for (long sweep = 0; sweep < detail::kMaxSweeps; ++sweep) {
    ValueFunction<Scalar> next = r + mdp.gamma() * (P * v);
    const Scalar residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (residual <= tol) return v;
  }
  throw std::runtime_error("policy_evaluation: tolerance not reached");
}

/// Greedy policy w.r.t. v; ties go to the lowest action index.
template <typename Scalar>
DeterministicPolicy greedy_policy(const TabularMDP<Scalar> &mdp, const ValueFunction<Scalar> &v) {
  const RewardTable<Scalar> q = q_values(mdp, v);
  DeterministicPolicy pi;
  pi.action.resize(static_cast<std::size_t>(mdp.n_states()));
  for (Index s = 0; s < mdp.n_states(); ++s) {
    Index best = 0;
    q.row(s).maxCoeff(&best);
    pi.action[static_cast<std::size_t>(s)] = best;
  }
  return pi;
}

/// Per-state argmax sets {a : Q*(s,a) >= max_a' Q*(s,a') - tie_tol}.
template <typename Scalar>
PolicySet optimal_policy_set(const TabularMDP<Scalar> &mdp, Scalar tie_tol = Scalar(1e-6),
                             Scalar vi_tol = Scalar(1e-9)) {
  detail::check_tolerance(tie_tol, "optimal_policy_set");
  const RewardTable<Scalar> q = q_values(mdp, value_iteration(mdp, vi_tol));
  PolicySet set;
  set.per_state_actions.resize(static_cast<std::size_t>(mdp.n_states()));
  for (Index s = 0; s < mdp.n_states(); ++s) {
    const Scalar best = q.row(s).maxCoeff();
    auto &acts = set.per_state_actions[static_cast<std::size_t>(s)];
    for (Index a = 0; a < mdp.n_actions(); ++a)
      if (q(s, a) >= best - tie_tol) acts.push_back(a);
  }
  return set;
}

/// True iff |V^pi(s) - V*(s)| < eps for every state. V^pi is evaluated at tolerance eps / 10.
template <typename Scalar>
bool is_eps_converged(const TabularMDP<Scalar> &mdp, const DeterministicPolicy &policy,
                      const ValueFunction<Scalar> &v_star, Scalar eps) {
  if (!(eps > Scalar(0)) || !std::isfinite(eps))
    throw std::invalid_argument("is_eps_converged: eps must be positive and finite");
  if (v_star.size() != mdp.n_states())
    throw std::invalid_argument("is_eps_converged: v_star length does not match the MDP");
  const ValueFunction<Scalar> v_pi = policy_evaluation(mdp, policy, eps / Scalar(10));
  return (v_pi - v_star).cwiseAbs().maxCoeff() < eps;
}

}  // namespace msrl
