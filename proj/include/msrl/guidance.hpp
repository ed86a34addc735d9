#pragma once

#include "msrl/format.hpp"
#include "msrl/mdp.hpp"

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msrl {

/// Ordered reward functions R_1..R_N over one shared <S, A, P, gamma>.
template <typename Scalar = double>
class GuidanceStack {
 public:
  GuidanceStack(TabularMDP<Scalar> base, std::vector<RewardTable<Scalar>> rewards)
      : base_(std::move(base)), rewards_(std::move(rewards)) {
    if (rewards_.empty()) throw std::invalid_argument("GuidanceStack: need at least one guidance");
    for (const auto &r : rewards_)
      if (r.rows() != base_.n_states() || r.cols() != base_.n_actions())
        throw std::invalid_argument("GuidanceStack: reward table shape differs from the base MDP");
  }

  std::size_t size() const { return rewards_.size(); }
  const TabularMDP<Scalar> &base() const { return base_; }

  /// Zero-based stage index.
  const RewardTable<Scalar> &rewards(std::size_t stage) const { return rewards_.at(stage); }
  TabularMDP<Scalar> stage_mdp(std::size_t stage) const { return base_.with_rewards(rewards(stage)); }

  /// Stack holding only the listed zero-based stages, in the given order.
  GuidanceStack select(const std::vector<std::size_t> &stages) const {
    std::vector<RewardTable<Scalar>> picked;
    for (std::size_t i : stages) picked.push_back(rewards(i));
    return GuidanceStack(base_, std::move(picked));
  }

 private:
  TabularMDP<Scalar> base_;
  std::vector<RewardTable<Scalar>> rewards_;
};

/// Stage transition steps t_1 < ... < t_N (t_0 = 0 implicit).
class StageSchedule {
 public:
  explicit StageSchedule(std::vector<std::int64_t> transitions) : t_(std::move(transitions)) {
    if (t_.empty()) throw std::invalid_argument("StageSchedule: empty schedule");
    if (t_.front() <= 0) throw std::invalid_argument("StageSchedule: t_1 must be positive");
    for (std::size_t i = 1; i < t_.size(); ++i)
      if (t_[i] <= t_[i - 1]) throw std::invalid_argument("StageSchedule: transitions must increase");
  }

  std::size_t size() const { return t_.size(); }
  const std::vector<std::int64_t> &transitions() const { return t_; }
  std::int64_t last() const { return t_.back(); }

  /// Zero-based stage i with step in [t_{i}, t_{i+1}); steps at or past t_N stay in the last stage.
  std::size_t stage_at(std::int64_t step) const {
    if (step < 0) throw std::invalid_argument("StageSchedule: negative global step");
    for (std::size_t i = 0; i < t_.size(); ++i)
      if (step < t_[i]) return i;
    return t_.size() - 1;
  }

  auto operator<=>(const StageSchedule &) const = default;

 private:
  std::vector<std::int64_t> t_;
};

inline std::string to_string(const StageSchedule &schedule) {
  std::string out = "(";
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(schedule.transitions()[i]);
  }
  return out + ")";
}

/// Reward source for the multi-stage MDP: R_i(s, a) while the global step is in stage i.
template <typename Scalar = double>
class SwitchedReward {
 public:
  SwitchedReward(GuidanceStack<Scalar> stack, StageSchedule schedule)
      : stack_(std::move(stack)), schedule_(std::move(schedule)) {
    if (schedule_.size() != stack_.size())
      throw std::invalid_argument("SwitchedReward: schedule length differs from the guidance count");
  }

  std::size_t stage(std::int64_t global_step) const { return schedule_.stage_at(global_step); }

  Scalar operator()(std::int64_t global_step, Index s, Index a) const {
    return stack_.rewards(stage(global_step))(s, a);
  }

  const GuidanceStack<Scalar> &stack() const { return stack_; }
  const StageSchedule &schedule() const { return schedule_; }

 private:
  GuidanceStack<Scalar> stack_;
  StageSchedule schedule_;
};

template <typename Scalar>
SwitchedReward<Scalar> compose_switched_reward(GuidanceStack<Scalar> stack, StageSchedule schedule) {
  return SwitchedReward<Scalar>(std::move(stack), std::move(schedule));
}

/// States with at least one action of exactly nonzero reward, ascending.
template <typename Scalar>
std::vector<Index> support(const RewardTable<Scalar> &reward, const TabularMDP<Scalar> &mdp) {
  if (reward.rows() != mdp.n_states() || reward.cols() != mdp.n_actions())
    throw std::invalid_argument("support: reward shape differs from the MDP");
  std::vector<Index> out;
  for (Index s = 0; s < reward.rows(); ++s)
    if ((reward.row(s).array() != Scalar(0)).any()) out.push_back(s);
  return out;
}

/// Which inclusion between consecutive optimal-policy sets is checked.
enum class NestingDirection {
  shrinking,  ///< Pi*_i contains Pi*_{i+1}
  growing,    ///< Pi*_i is contained in Pi*_{i+1}
};

struct SupportViolation {
  std::size_t stage;  ///< 1-based i: state in supp(R_i) but not supp(R_{i+1})
  Index state;
  bool operator==(const SupportViolation &) const = default;
};

struct OptimalityViolation {
  std::size_t stage;  ///< 1-based i of the pair (i, i+1)
  Index state;
  Index action;  ///< optimal on the larger-index side only (shrinking) or smaller side only (growing)
  bool operator==(const OptimalityViolation &) const = default;
};

struct NestingReport {
  std::vector<SupportViolation> support_violations;
  std::vector<OptimalityViolation> optimality_violations;

  bool support_ok() const { return support_violations.empty(); }
  bool optimality_ok() const { return optimality_violations.empty(); }
  bool ok() const { return support_ok() && optimality_ok(); }

  NestingReport &merge(const NestingReport &other) {
    support_violations.insert(support_violations.end(), other.support_violations.begin(),
                              other.support_violations.end());
    optimality_violations.insert(optimality_violations.end(), other.optimality_violations.begin(),
                                 other.optimality_violations.end());
    return *this;
  }
};

template <typename Scalar>
NestingReport check_support_nesting(const GuidanceStack<Scalar> &stack) {
  NestingReport report;
  std::vector<Index> prev = support(stack.rewards(0), stack.base());
  for (std::size_t i = 1; i < stack.size(); ++i) {
    std::vector<Index> next = support(stack.rewards(i), stack.base());
    std::vector<Index> missing;
    std::set_difference(prev.begin(), prev.end(), next.begin(), next.end(), std::back_inserter(missing));
    for (Index s : missing) report.support_violations.push_back({i, s});
    prev = std::move(next);
  }
  return report;
}

/// Inclusion test over per-state argmax sets of consecutive stage MDPs.
template <typename Scalar>
NestingReport check_optimality_nesting(const GuidanceStack<Scalar> &stack, Scalar tie_tol = Scalar(1e-6),
                                       NestingDirection direction = NestingDirection::shrinking,
                                       Scalar vi_tol = Scalar(1e-9)) {
  NestingReport report;
  if (stack.size() < 2) return report;
  std::vector<PolicySet> sets;
  for (std::size_t i = 0; i < stack.size(); ++i)
    sets.push_back(optimal_policy_set(stack.stage_mdp(i), tie_tol, vi_tol));
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    const PolicySet &outer = direction == NestingDirection::shrinking ? sets[i] : sets[i + 1];
    const PolicySet &inner = direction == NestingDirection::shrinking ? sets[i + 1] : sets[i];
    for (Index s = 0; s < inner.n_states(); ++s)
      for (Index a : inner.per_state_actions[static_cast<std::size_t>(s)])
        if (!outer.allows(s, a)) report.optimality_violations.push_back({i + 1, s, a});
  }
  return report;
}

/// R'(s, a) = R(s, a) + gamma * E[phi(s')] - phi(s). phi must vanish on terminal states.
template <typename Scalar>
RewardTable<Scalar> potential_shaping(const RewardTable<Scalar> &reward, const Vector<Scalar> &potential,
                                      const TabularMDP<Scalar> &mdp) {
  if (reward.rows() != mdp.n_states() || reward.cols() != mdp.n_actions() ||
      potential.size() != mdp.n_states())
    throw std::invalid_argument("potential_shaping: shape mismatch");
  for (Index s : mdp.terminal_states())
    if (potential(s) != Scalar(0))
      throw std::invalid_argument("potential_shaping: potential must be zero on terminal states");
  const Vector<Scalar> expected = mdp.transitions() * potential;
  RewardTable<Scalar> shaped =
      reward +
      mdp.gamma() * Eigen::Map<const RewardTable<Scalar>>(expected.data(), mdp.n_states(), mdp.n_actions());
  shaped.colwise() -= potential;
  return shaped;
}

inline const char *to_string(NestingDirection d) {
  return d == NestingDirection::shrinking ? "shrinking" : "growing";
}

/// Human-readable listing of a report.
inline void write_report_text(std::ostream &out, const NestingReport &report) {
  out << "support nesting: " << (report.support_ok() ? "ok" : "VIOLATED") << " ("
      << report.support_violations.size() << " violations)\n";
  for (const auto &v : report.support_violations)
    out << "  stage " << v.stage << " -> " << v.stage + 1 << ": state " << v.state
        << " leaves the support\n";
  out << "optimality nesting: " << (report.optimality_ok() ? "ok" : "VIOLATED") << " ("
      << report.optimality_violations.size() << " violations)\n";
  for (const auto &v : report.optimality_violations)
    out << "  stage " << v.stage << " -> " << v.stage + 1 << ": state " << v.state << " action "
        << v.action << '\n';
}

/// CSV listing: check,stage,state,action (action empty for support rows).
inline void write_report_csv(std::ostream &out, const NestingReport &report) {
  out << "check,stage,state,action\n";
  for (const auto &v : report.support_violations)
    out << "support," << v.stage << ',' << v.state << ",\n";
  for (const auto &v : report.optimality_violations)
    out << "optimality," << v.stage << ',' << v.state << ',' << v.action << '\n';
}

}  // namespace msrl
