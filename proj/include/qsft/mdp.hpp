#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsft/common.hpp"

namespace qsft {

/// Dense (state, action) table of doubles. The tag parameter keeps Q-values,
/// policies and likelihoods from being mixed up at call sites.
template <class Tag>
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
      : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, fill) {}

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }

  double& operator()(std::size_t s, std::size_t a) { return values_[s * num_actions_ + a]; }
  double operator()(std::size_t s, std::size_t a) const { return values_[s * num_actions_ + a]; }

  std::span<double> row(std::size_t s) { return {values_.data() + s * num_actions_, num_actions_}; }
  std::span<const double> row(std::size_t s) const {
    return {values_.data() + s * num_actions_, num_actions_};
  }

  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const StateActionTable&, const StateActionTable&) = default;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> values_;
};

struct QTag {};
struct PolicyTag {};

using QTable = StateActionTable<QTag>;
using TabularPolicy = StateActionTable<PolicyTag>;

template <class Tag>
double max_abs_difference(const StateActionTable<Tag>& x, const StateActionTable<Tag>& y) {
  require(x.num_states() == y.num_states() && x.num_actions() == y.num_actions(),
          "table shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < x.values().size(); ++i)
    m = std::max(m, std::abs(x.values()[i] - y.values()[i]));
  return m;
}

inline void validate_policy(const TabularPolicy& policy, double tol = 1e-9) {
  for (std::size_t s = 0; s < policy.num_states(); ++s) {
    double sum = 0.0;
    for (double p : policy.row(s)) {
      require(p >= 0.0 && p <= 1.0 + tol, "policy entry outside [0,1] at state " + std::to_string(s));
      sum += p;
    }
    require(std::abs(sum - 1.0) <= tol, "policy row does not sum to 1 at state " + std::to_string(s));
  }
}

inline TabularPolicy uniform_policy(std::size_t num_states, std::size_t num_actions) {
  return TabularPolicy(num_states, num_actions, 1.0 / static_cast<double>(num_actions));
}

// Finite MDP with mean rewards. Terminal states are absorbing: they loop to
// themselves with probability one and pay nothing, so the Bellman operators
// need no terminal branch.
class TabularMdp {
 public:
  TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
             std::vector<double> reward, std::vector<bool> terminal, std::vector<double> initial_dist,
             double discount)
      : num_states_(num_states),
        num_actions_(num_actions),
        transition_(std::move(transition)),
        reward_(std::move(reward)),
        terminal_(std::move(terminal)),
        initial_dist_(std::move(initial_dist)),
        discount_(discount) {
    validate();
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  double discount() const { return discount_; }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * num_actions_ + a) * num_states_ + next];
  }
  std::span<const double> next_state_dist(std::size_t s, std::size_t a) const {
    return {transition_.data() + (s * num_actions_ + a) * num_states_, num_states_};
  }
  double reward(std::size_t s, std::size_t a) const { return reward_[s * num_actions_ + a]; }
  bool terminal(std::size_t s) const { return terminal_[s]; }
  std::span<const double> initial_dist() const { return initial_dist_; }

  const std::vector<double>& transition_tensor() const { return transition_; }
  const std::vector<double>& reward_table() const { return reward_; }
  const std::vector<bool>& terminal_flags() const { return terminal_; }

  TabularMdp with_discount(double discount) const {
    return TabularMdp(num_states_, num_actions_, transition_, reward_, terminal_, initial_dist_, discount);
  }
  TabularMdp with_rewards(std::vector<double> reward) const {
    return TabularMdp(num_states_, num_actions_, transition_, std::move(reward), terminal_, initial_dist_,
                      discount_);
  }
  TabularMdp with_initial_dist(std::vector<double> initial) const {
    return TabularMdp(num_states_, num_actions_, transition_, reward_, terminal_, std::move(initial),
                      discount_);
  }

  friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

 private:
  void validate() const {
    constexpr double tol = 1e-9;
    require(num_states_ > 0 && num_actions_ > 0, "mdp needs at least one state and one action");
    require(transition_.size() == num_states_ * num_actions_ * num_states_, "transition tensor has wrong size");
    require(reward_.size() == num_states_ * num_actions_, "reward table has wrong size");
    require(terminal_.size() == num_states_, "terminal flags have wrong size");
    require(initial_dist_.size() == num_states_, "initial distribution has wrong size");
    require(discount_ >= 0.0 && discount_ < 1.0, "discount must lie in [0,1)");
    for (std::size_t s = 0; s < num_states_; ++s) {
      for (std::size_t a = 0; a < num_actions_; ++a) {
        double sum = 0.0;
        for (double p : next_state_dist(s, a)) {
          require(p >= 0.0, "negative transition probability");
          sum += p;
        }
        require(std::abs(sum - 1.0) <= tol, "transition row (" + std::to_string(s) + "," +
                                                std::to_string(a) + ") does not sum to 1");
        const double r = reward(s, a);
        require(r >= 0.0 && r <= 1.0, "reward outside [0,1] at (" + std::to_string(s) + "," +
                                          std::to_string(a) + ")");
        if (terminal_[s]) {
          require(transition(s, a, s) == 1.0 && r == 0.0,
                  "terminal state " + std::to_string(s) + " must self-loop with zero reward");
        }
      }
    }
    double init = 0.0;
    for (double p : initial_dist_) {
      require(p >= 0.0, "negative initial probability");
      init += p;
    }
    require(std::abs(init - 1.0) <= tol, "initial distribution does not sum to 1");
  }

  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<bool> terminal_;
  std::vector<double> initial_dist_;
  double discount_;
};

struct ValueIterationTrace {
  QTable q;
  std::vector<double> residuals;  // sup-norm Bellman residual per sweep
};

// Optimal Q-function by repeated Bellman-optimality sweeps from zero. Stops
// when the sup-norm residual of the returned table is at most tol.
inline ValueIterationTrace value_iteration_trace(const TabularMdp& mdp, double tol,
                                                 std::size_t max_iters = 100000) {
  require(tol > 0.0, "value_iteration: tol must be positive");
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  const double gamma = mdp.discount();
  QTable q(S, A, 0.0), next(S, A, 0.0);
  std::vector<double> v(S, 0.0);
  ValueIterationTrace trace;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t s = 0; s < S; ++s) {
      auto row = q.row(s);
      v[s] = *std::max_element(row.begin(), row.end());
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double expected = 0.0;
        const auto dist = mdp.next_state_dist(s, a);
        for (std::size_t n = 0; n < S; ++n) expected += dist[n] * v[n];
        next(s, a) = mdp.reward(s, a) + gamma * expected;
        residual = std::max(residual, std::abs(next(s, a) - q(s, a)));
      }
    }
    std::swap(q, next);
    trace.residuals.push_back(residual);
    // q now holds T(q_old); its own residual is at most gamma * residual.
    if (gamma * residual <= tol) {
      trace.q = std::move(q);
      return trace;
    }
  }
  throw ConvergenceError("value_iteration did not converge", trace.residuals.back(), max_iters);
}

inline QTable value_iteration(const TabularMdp& mdp, double tol, std::size_t max_iters = 100000) {
  return value_iteration_trace(mdp, tol, max_iters).q;
}

// Q^pi by iterating the on-policy Bellman recurrence.
inline QTable policy_q(const TabularMdp& mdp, const TabularPolicy& policy, double tol,
                       std::size_t max_iters = 100000) {
  require(tol > 0.0, "policy_q: tol must be positive");
  require(policy.num_states() == mdp.num_states() && policy.num_actions() == mdp.num_actions(),
          "policy shape does not match mdp");
  validate_policy(policy);
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  const double gamma = mdp.discount();
  QTable q(S, A, 0.0), next(S, A, 0.0);
  std::vector<double> v(S, 0.0);
  double residual = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t a = 0; a < A; ++a) acc += policy(s, a) * q(s, a);
      v[s] = acc;
    }
    residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t a = 0; a < A; ++a) {
        double expected = 0.0;
        const auto dist = mdp.next_state_dist(s, a);
        for (std::size_t n = 0; n < S; ++n) expected += dist[n] * v[n];
        next(s, a) = mdp.reward(s, a) + gamma * expected;
        residual = std::max(residual, std::abs(next(s, a) - q(s, a)));
      }
    }
    std::swap(q, next);
    if (gamma * residual <= tol) return q;
  }
  throw ConvergenceError("policy_q did not converge", residual, max_iters);
}

inline double expected_return(const TabularMdp& mdp, const TabularPolicy& policy, double tol = 1e-12) {
  const QTable q = policy_q(mdp, policy, tol);
  const auto mu = mdp.initial_dist();
  double total = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    if (mu[s] == 0.0) continue;
    double v = 0.0;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) v += policy(s, a) * q(s, a);
    total += mu[s] * v;
  }
  return total;
}

// Deterministic greedy policy; ties go to the lowest action id.
inline TabularPolicy greedy_policy(const QTable& q) {
  TabularPolicy pi(q.num_states(), q.num_actions(), 0.0);
  for (std::size_t s = 0; s < q.num_states(); ++s) pi(s, static_cast<std::size_t>(argmax(q.row(s)))) = 1.0;
  return pi;
}

// ---------------------------------------------------------------------------
// Offline data.

/// Observation as integers: a single state id for tabular environments, a
/// padded token history for token environments.
using Obs = std::vector<int>;

struct Transition {
  Obs state;
  int action = 0;
  double reward = 0.0;
  Obs next_state;
  bool done = false;
  int traj_id = 0;
  int step_index = 0;

  int state_id() const { return state.at(0); }
  int next_state_id() const { return next_state.at(0); }

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMeta {
  std::string env;
  double gamma = 0.95;
  double reward_scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t num_trajectories = 0;
  std::size_t num_actions = 0;
  std::size_t num_states = 0;   // 0 for token environments
  bool tabular = true;          // ids vs token vectors
  double epsilon = 1.0;         // generator mixture weight, when applicable
  std::map<std::string, double> params;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

/// Immutable list of complete trajectories. Transitions are grouped by
/// trajectory, trajectories appear in increasing traj_id order, steps are
/// contiguous from zero, and only the last step of a trajectory is done.
class Dataset {
 public:
  struct Range {
    std::size_t begin;
    std::size_t end;
  };

  Dataset() = default;
  Dataset(std::vector<Transition> transitions, DatasetMeta meta)
      : transitions_(std::move(transitions)), meta_(std::move(meta)) {
    index_and_validate();
    meta_.num_trajectories = trajectories_.size();
  }

  const std::vector<Transition>& transitions() const { return transitions_; }
  const DatasetMeta& meta() const { return meta_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  std::size_t num_trajectories() const { return trajectories_.size(); }
  const std::vector<Range>& trajectories() const { return trajectories_; }
  std::span<const Transition> trajectory(std::size_t i) const {
    const Range r = trajectories_.at(i);
    return {transitions_.data() + r.begin, r.end - r.begin};
  }

  double undiscounted_return(std::size_t i) const {
    double total = 0.0;
    for (const auto& t : trajectory(i)) total += t.reward;
    return total;
  }
  double discounted_return(std::size_t i, double gamma) const {
    double total = 0.0, scale = 1.0;
    for (const auto& t : trajectory(i)) {
      total += scale * t.reward;
      scale *= gamma;
    }
    return total;
  }

  friend bool operator==(const Dataset& x, const Dataset& y) {
    return x.transitions_ == y.transitions_ && x.meta_ == y.meta_;
  }

 private:
  void index_and_validate() {
    trajectories_.clear();
    std::size_t i = 0;
    int previous_id = std::numeric_limits<int>::min();
    while (i < transitions_.size()) {
      const int id = transitions_[i].traj_id;
      require(id > previous_id, "dataset trajectories must appear in increasing traj_id order");
      previous_id = id;
      const std::size_t begin = i;
      int expected_step = 0;
      while (i < transitions_.size() && transitions_[i].traj_id == id) {
        const auto& t = transitions_[i];
        require(t.step_index == expected_step,
                "trajectory " + std::to_string(id) + " has non-contiguous step indices");
        require(std::isfinite(t.reward), "non-finite reward in trajectory " + std::to_string(id));
        require(!t.state.empty() && !t.next_state.empty(), "empty observation");
        ++expected_step;
        ++i;
      }
      for (std::size_t k = begin; k + 1 < i; ++k)
        require(!transitions_[k].done, "trajectory " + std::to_string(id) + " has done before its last step");
      require(transitions_[i - 1].done, "trajectory " + std::to_string(id) + " does not end with done");
      trajectories_.push_back({begin, i});
    }
  }

  std::vector<Transition> transitions_;
  DatasetMeta meta_;
  std::vector<Range> trajectories_;
};

/// Rescales rewards so every trajectory's return is at most one. The factor
/// is the largest undiscounted trajectory return (or 1), which bounds the
/// discounted return for every discount at once and keeps return order.
inline std::pair<Dataset, double> scale_rewards(const Dataset& dataset, double gamma) {
  require(!dataset.empty(), "scale_rewards: empty dataset");
  require(gamma >= 0.0 && gamma <= 1.0, "scale_rewards: gamma must lie in [0,1]");
  double factor = 1.0;
  for (std::size_t i = 0; i < dataset.num_trajectories(); ++i) {
    for (const auto& t : dataset.trajectory(i))
      require(t.reward >= 0.0, "scale_rewards: negative rewards cannot satisfy the bounded-return assumption");
    factor = std::max(factor, dataset.undiscounted_return(i));
  }
  std::vector<Transition> scaled = dataset.transitions();
  if (factor != 1.0)
    for (auto& t : scaled) t.reward /= factor;
  DatasetMeta meta = dataset.meta();
  meta.gamma = gamma;
  meta.reward_scale = dataset.meta().reward_scale * factor;
  return {Dataset(std::move(scaled), std::move(meta)), factor};
}

/// Count-based behavior policy with additive smoothing. Unvisited states get
/// uniform rows.
inline TabularPolicy empirical_behavior_policy(const Dataset& dataset, std::size_t num_states,
                                               std::size_t num_actions, double smoothing = 0.1) {
  require(smoothing >= 0.0, "smoothing must be nonnegative");
  require(num_actions > 0, "need at least one action");
  QTable counts(num_states, num_actions, 0.0);
  for (const auto& t : dataset.transitions()) {
    const int s = t.state_id();
    require(s >= 0 && static_cast<std::size_t>(s) < num_states, "state id out of range");
    require(t.action >= 0 && static_cast<std::size_t>(t.action) < num_actions, "action id out of range");
    counts(static_cast<std::size_t>(s), static_cast<std::size_t>(t.action)) += 1.0;
  }
  TabularPolicy pi(num_states, num_actions, 0.0);
  const double A = static_cast<double>(num_actions);
  for (std::size_t s = 0; s < num_states; ++s) {
    double n = 0.0;
    for (double c : counts.row(s)) n += c;
    if (n + smoothing * A == 0.0) {
      for (auto& p : pi.row(s)) p = 1.0 / A;
      continue;
    }
    for (std::size_t a = 0; a < num_actions; ++a) pi(s, a) = (counts(s, a) + smoothing) / (n + smoothing * A);
  }
  return pi;
}

}  // namespace qsft
