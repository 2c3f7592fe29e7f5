#pragma once

// Desk-scale environments and offline dataset generators.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsft/common.hpp"
#include "qsft/mdp.hpp"

namespace qsft {

struct StepResult {
  Obs obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// Episodic environment. Instances carry per-episode state and are not
// shared between threads; use clone() to get one per worker.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::unique_ptr<Env> clone() const = 0;
  virtual std::string name() const = 0;
  virtual std::map<std::string, double> params() const = 0;
  virtual int num_actions() const = 0;
  virtual int horizon() const = 0;
  virtual double discount() const = 0;

  virtual std::size_t feature_width() const = 0;
  virtual void encode(const Obs& obs, std::span<double> out) const = 0;

  virtual Obs reset(Rng& rng) = 0;
  virtual StepResult step(int action, Rng& rng) = 0;

  // Action distribution of a competent hand-written policy at `obs`.
  virtual std::vector<double> scripted_policy(const Obs& obs) const = 0;

  virtual bool tabular() const { return false; }
  virtual std::size_t num_states() const { return 0; }

  std::vector<double> features(const Obs& obs) const {
    std::vector<double> out(feature_width(), 0.0);
    encode(obs, out);
    return out;
  }
};

// Any TabularMdp as an episodic environment. Observations are {state id};
// features are one-hot over states. The scripted policy acts greedily on Q*.
class TabularEnv : public Env {
 public:
  TabularEnv(std::string name, TabularMdp mdp, int horizon, std::map<std::string, double> params = {})
      : name_(std::move(name)), mdp_(std::move(mdp)), horizon_(horizon), params_(std::move(params)) {
    require(horizon_ > 0, "horizon must be positive");
    scripted_ = greedy_policy(value_iteration(mdp_, 1e-12));
  }

  std::unique_ptr<Env> clone() const override { return std::make_unique<TabularEnv>(*this); }
  std::string name() const override { return name_; }
  std::map<std::string, double> params() const override { return params_; }
  int num_actions() const override { return static_cast<int>(mdp_.num_actions()); }
  int horizon() const override { return horizon_; }
  double discount() const override { return mdp_.discount(); }
  bool tabular() const override { return true; }
  std::size_t num_states() const override { return mdp_.num_states(); }
  const TabularMdp& mdp() const { return mdp_; }

  std::size_t feature_width() const override { return mdp_.num_states(); }
  void encode(const Obs& obs, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    out[checked_state(obs)] = 1.0;
  }

  Obs reset(Rng& rng) override {
    state_ = static_cast<std::size_t>(sample_index(mdp_.initial_dist(), rng));
    return {static_cast<int>(state_)};
  }

  StepResult step(int action, Rng& rng) override {
    require(action >= 0 && action < num_actions(), "action " + std::to_string(action) + " out of range");
    const auto a = static_cast<std::size_t>(action);
    const double r = mdp_.reward(state_, a);
    const auto dist = mdp_.next_state_dist(state_, a);
    state_ = static_cast<std::size_t>(sample_index(dist, rng));
    StepResult result;
    result.obs = {static_cast<int>(state_)};
    result.reward = r;
    result.done = mdp_.terminal(state_);
    result.success = result.done && r > 0.0;
    return result;
  }

  std::vector<double> scripted_policy(const Obs& obs) const override {
    const auto row = scripted_.row(checked_state(obs));
    return {row.begin(), row.end()};
  }

 private:
  std::size_t checked_state(const Obs& obs) const {
    require(obs.size() == 1 && obs[0] >= 0 && static_cast<std::size_t>(obs[0]) < mdp_.num_states(),
            "observation is not a state id of " + name_);
    return static_cast<std::size_t>(obs[0]);
  }

  std::string name_;
  TabularMdp mdp_;
  int horizon_;
  std::map<std::string, double> params_;
  TabularPolicy scripted_;
  std::size_t state_ = 0;
};

// ---------------------------------------------------------------------------
// Stitching gridworld.
//
//   S . M . D        S = start, M = midpoint, D = dead end (terminal, 0)
//   # # . . .        G = goal (terminal, entering it pays 1)
//   # # . . .        # = wall
//   # # . . .
//   # # . . G
//
// The top row from S to M is a one-cell corridor, so every S->G path crosses
// M; beyond M the grid is open. Shortest paths are still Manhattan.

enum GridAction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

struct GridWorld {
  int width = 0;
  int height = 0;
  int start = 0;
  int midpoint = 0;
  int dead_end = 0;
  int goal = 0;
  std::vector<bool> wall;
  TabularMdp mdp;

  int cell(int x, int y) const { return y * width + x; }
  int x_of(int id) const { return id % width; }
  int y_of(int id) const { return id / width; }

  // Deterministic successor; walls and borders leave the agent in place.
  int move(int id, int action) const {
    static constexpr std::array<int, 4> dx{0, 1, 0, -1};
    static constexpr std::array<int, 4> dy{-1, 0, 1, 0};
    const int x = x_of(id) + dx[static_cast<std::size_t>(action)];
    const int y = y_of(id) + dy[static_cast<std::size_t>(action)];
    if (x < 0 || y < 0 || x >= width || y >= height || wall[static_cast<std::size_t>(cell(x, y))]) return id;
    return cell(x, y);
  }
};

inline GridWorld build_gridworld_stitch(int width, int height, double gamma = 0.95) {
  require(width >= 3 && height >= 3, "gridworld needs width, height >= 3");
  GridWorld g{.width = width, .height = height, .start = 0, .midpoint = 0, .dead_end = 0, .goal = 0, .wall = {},
              .mdp = TabularMdp(1, 1, {1.0}, {0.0}, {false}, {1.0}, 0.0)};
  const int mx = (width - 1) / 2;
  g.start = g.cell(0, 0);
  g.midpoint = g.cell(mx, 0);
  g.dead_end = g.cell(width - 1, 0);
  g.goal = g.cell(width - 1, height - 1);
  const auto S = static_cast<std::size_t>(width * height);
  g.wall.assign(S, false);
  for (int y = 1; y < height; ++y)
    for (int x = 0; x < mx; ++x) g.wall[static_cast<std::size_t>(g.cell(x, y))] = true;

  constexpr std::size_t A = 4;
  std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0), init(S, 0.0);
  std::vector<bool> terminal(S, false);
  terminal[static_cast<std::size_t>(g.goal)] = true;
  terminal[static_cast<std::size_t>(g.dead_end)] = true;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      std::size_t next = s;
      if (!terminal[s] && !g.wall[s]) next = static_cast<std::size_t>(g.move(static_cast<int>(s), static_cast<int>(a)));
      P[(s * A + a) * S + next] = 1.0;
      if (!terminal[s] && next == static_cast<std::size_t>(g.goal)) R[s * A + a] = 1.0;
    }
  }
  init[static_cast<std::size_t>(g.start)] = 1.0;
  g.mdp = TabularMdp(S, A, std::move(P), std::move(R), std::move(terminal), std::move(init), gamma);
  return g;
}

inline TabularEnv make_gridworld_env(const GridWorld& g) {
  return TabularEnv("gridworld-stitch", g.mdp, 4 * g.width * g.height,
                    {{"width", g.width}, {"height", g.height}});
}

struct StitchOptions {
  // Probability that a family-A step inside the start corridor is a uniformly
  // random action instead of the move toward M.
  double corridor_noise = 0.5;
};

/// Two families of trajectories, alternating by traj_id. Family A (even ids)
/// walks S -> M with corridor noise and then straight along the top row into
/// the dead end (return 0). Family B (odd ids) starts at M and takes a random
/// monotone path to G (return 1). No trajectory connects S to G.
inline Dataset gen_stitch_dataset(const GridWorld& g, std::size_t n_trajectories, std::uint64_t seed,
                                  StitchOptions options = {}) {
  require(n_trajectories > 0, "gen_stitch_dataset: n_trajectories must be positive (empty dataset)");
  require(options.corridor_noise >= 0.0 && options.corridor_noise <= 1.0, "corridor_noise must lie in [0,1]");
  std::vector<Transition> out;
  const int max_corridor_steps = 50 * g.width * g.height;

  auto push = [&](int traj, int& step, int s, int a, int next) {
    Transition t;
    t.state = {s};
    t.action = a;
    t.next_state = {next};
    t.reward = g.mdp.reward(static_cast<std::size_t>(s), static_cast<std::size_t>(a));
    t.done = g.mdp.terminal(static_cast<std::size_t>(next));
    t.traj_id = traj;
    t.step_index = step++;
    out.push_back(std::move(t));
  };

  for (std::size_t i = 0; i < n_trajectories; ++i) {
    Rng rng = stream_rng(seed, i);
    const int traj = static_cast<int>(i);
    int step = 0;
    if (i % 2 == 0) {
      int c = g.start;
      while (c != g.midpoint) {
        int a = kRight;
        if (step < max_corridor_steps && uniform01(rng) < options.corridor_noise)
          a = static_cast<int>(uniform_index(rng, 4));
        const int next = g.move(c, a);
        push(traj, step, c, a, next);
        c = next;
      }
      while (c != g.dead_end) {
        const int next = g.move(c, kRight);
        push(traj, step, c, kRight, next);
        c = next;
      }
    } else {
      int c = g.midpoint;
      while (c != g.goal) {
        std::vector<int> options_here;
        if (g.x_of(c) < g.width - 1 && g.move(c, kRight) != g.dead_end) options_here.push_back(kRight);
        if (g.y_of(c) < g.height - 1) options_here.push_back(kDown);
        const int a = options_here[uniform_index(rng, options_here.size())];
        const int next = g.move(c, a);
        push(traj, step, c, a, next);
        c = next;
      }
    }
  }

  DatasetMeta meta;
  meta.env = "gridworld-stitch";
  meta.gamma = g.mdp.discount();
  meta.seed = seed;
  meta.num_actions = 4;
  meta.num_states = g.mdp.num_states();
  meta.tabular = true;
  meta.epsilon = 1.0 - options.corridor_noise;
  meta.params = {{"width", g.width}, {"height", g.height}};
  return Dataset(std::move(out), std::move(meta));
}

// ---------------------------------------------------------------------------
// Mini-Wordle token MDP.

enum class Feedback : int { kExact = 0, kPresent = 1, kAbsent = 2 };

/// Per-letter feedback for `guess` against `hidden`: exact matches first,
/// then present marks limited by the unmatched letter counts, left to right.
inline std::vector<Feedback> wordle_feedback(std::span<const int> hidden, std::span<const int> guess) {
  require(hidden.size() == guess.size(), "feedback needs equal-length words");
  std::vector<Feedback> fb(guess.size(), Feedback::kAbsent);
  std::map<int, int> unmatched;
  for (std::size_t i = 0; i < guess.size(); ++i) {
    if (guess[i] == hidden[i]) fb[i] = Feedback::kExact;
    else ++unmatched[hidden[i]];
  }
  for (std::size_t i = 0; i < guess.size(); ++i) {
    if (fb[i] == Feedback::kExact) continue;
    auto it = unmatched.find(guess[i]);
    if (it != unmatched.end() && it->second > 0) {
      fb[i] = Feedback::kPresent;
      --it->second;
    }
  }
  return fb;
}

// Token layout: 0 = PAD, 1..K = letters, K+1..K+3 = exact/present/absent.
// The agent emits one letter per step; after every word_length letters the
// environment appends word_length feedback tokens. Reward 1 on a correct
// guess, 0 when the guesses run out.
class MiniWordle : public Env {
 public:
  static constexpr int kPad = 0;

  MiniWordle(int word_length = 3, int alphabet = 5, int max_guesses = 4, double gamma = 0.95,
             std::vector<std::vector<int>> words = {})
      : word_length_(word_length), alphabet_(alphabet), max_guesses_(max_guesses), gamma_(gamma),
        words_(std::move(words)) {
    require(word_length_ >= 1 && alphabet_ >= 2 && max_guesses_ >= 1, "invalid mini-wordle parameters");
    require(gamma_ >= 0.0 && gamma_ < 1.0, "discount must lie in [0,1)");
    double count = 1.0;
    for (int i = 0; i < word_length_; ++i) count *= alphabet_;
    require(count <= 1e5, "mini-wordle vocabulary too large to enumerate");
    require(history_length() * static_cast<std::size_t>(vocab_size()) <= 100000,
            "mini-wordle state encoding too wide");
    if (words_.empty()) words_ = all_words(word_length_, alphabet_);
    for (const auto& w : words_) {
      require(static_cast<int>(w.size()) == word_length_, "word list entry has wrong length");
      for (int c : w) require(c >= 0 && c < alphabet_, "word list entry uses a letter outside the alphabet");
    }
  }

  static std::vector<std::vector<int>> all_words(int word_length, int alphabet) {
    std::vector<std::vector<int>> words{{}};
    for (int i = 0; i < word_length; ++i) {
      std::vector<std::vector<int>> next;
      for (const auto& prefix : words)
        for (int c = 0; c < alphabet; ++c) {
          auto w = prefix;
          w.push_back(c);
          next.push_back(std::move(w));
        }
      words = std::move(next);
    }
    return words;
  }

  int word_length() const { return word_length_; }
  int alphabet() const { return alphabet_; }
  int max_guesses() const { return max_guesses_; }
  const std::vector<std::vector<int>>& words() const { return words_; }
  int vocab_size() const { return alphabet_ + 4; }
  int letter_token(int letter) const { return letter + 1; }
  int feedback_token(Feedback f) const { return alphabet_ + 1 + static_cast<int>(f); }
  std::size_t history_length() const { return 2 * static_cast<std::size_t>(horizon()); }
  const std::vector<int>& hidden() const { return hidden_; }

  std::unique_ptr<Env> clone() const override { return std::make_unique<MiniWordle>(*this); }
  std::string name() const override { return "mini-wordle"; }
  std::map<std::string, double> params() const override {
    return {{"word_len", word_length_}, {"alphabet", alphabet_}, {"guesses", max_guesses_}};
  }
  int num_actions() const override { return alphabet_; }
  int horizon() const override { return word_length_ * max_guesses_; }
  double discount() const override { return gamma_; }

  std::size_t feature_width() const override { return history_length() * static_cast<std::size_t>(vocab_size()); }
  void encode(const Obs& obs, std::span<double> out) const override {
    require(obs.size() == history_length(), "token observation has wrong length");
    std::fill(out.begin(), out.end(), 0.0);
    const auto V = static_cast<std::size_t>(vocab_size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      require(obs[i] >= 0 && obs[i] < vocab_size(), "token id out of range");
      out[i * V + static_cast<std::size_t>(obs[i])] = 1.0;
    }
  }

  // Starts an episode with a specific hidden word.
  Obs reset_with(std::vector<int> hidden) {
    require(static_cast<int>(hidden.size()) == word_length_, "hidden word has wrong length");
    hidden_ = std::move(hidden);
    tokens_.clear();
    current_.clear();
    guesses_ = 0;
    finished_ = false;
    return observation();
  }

  Obs reset(Rng& rng) override { return reset_with(words_[uniform_index(rng, words_.size())]); }

  StepResult step(int action, Rng&) override {
    if (action < 0 || action >= alphabet_)
      throw InvalidArgument("mini-wordle: token " + std::to_string(action) + " is not a letter");
    require(!finished_, "mini-wordle: step after episode end");
    tokens_.push_back(letter_token(action));
    current_.push_back(action);
    StepResult result;
    if (static_cast<int>(current_.size()) == word_length_) {
      for (Feedback f : wordle_feedback(hidden_, current_)) tokens_.push_back(feedback_token(f));
      ++guesses_;
      if (current_ == hidden_) {
        result.reward = 1.0;
        result.done = result.success = true;
      } else if (guesses_ == max_guesses_) {
        result.done = true;
      }
      current_.clear();
    }
    finished_ = result.done;
    result.obs = observation();
    return result;
  }

  /// Guesses with feedback plus the unfinished guess, parsed from tokens.
  struct History {
    std::vector<std::pair<std::vector<int>, std::vector<Feedback>>> turns;
    std::vector<int> partial;
  };

  History parse(const Obs& obs) const {
    History h;
    std::size_t i = 0;
    const auto L = static_cast<std::size_t>(word_length_);
    while (i < obs.size() && obs[i] != kPad) {
      std::vector<int> letters;
      while (letters.size() < L && i < obs.size() && obs[i] >= 1 && obs[i] <= alphabet_) letters.push_back(obs[i++] - 1);
      if (letters.size() < L) {
        h.partial = std::move(letters);
        break;
      }
      std::vector<Feedback> fb;
      while (fb.size() < L && i < obs.size() && obs[i] > alphabet_) fb.push_back(static_cast<Feedback>(obs[i++] - alphabet_ - 1));
      if (fb.size() < L) {
        h.partial = std::move(letters);
        break;
      }
      h.turns.emplace_back(std::move(letters), std::move(fb));
    }
    return h;
  }

  // Plays a uniformly random word consistent with all feedback so far: the
  // letter distribution is the candidate count per next letter.
  std::vector<double> scripted_policy(const Obs& obs) const override {
    const History h = parse(obs);
    std::vector<double> by_prefix(static_cast<std::size_t>(alphabet_), 0.0);
    std::vector<double> any(static_cast<std::size_t>(alphabet_), 0.0);
    const std::size_t pos = h.partial.size();
    for (const auto& w : words_) {
      bool consistent = true;
      for (const auto& [guess, fb] : h.turns)
        if (wordle_feedback(w, guess) != fb) {
          consistent = false;
          break;
        }
      if (!consistent) continue;
      any[static_cast<std::size_t>(w[pos])] += 1.0;
      if (std::equal(h.partial.begin(), h.partial.end(), w.begin())) by_prefix[static_cast<std::size_t>(w[pos])] += 1.0;
    }
    auto normalize = [](std::vector<double>& v) {
      double total = 0.0;
      for (double x : v) total += x;
      if (total <= 0.0) return false;
      for (double& x : v) x /= total;
      return true;
    };
    if (normalize(by_prefix)) return by_prefix;
    if (normalize(any)) return any;
    return std::vector<double>(static_cast<std::size_t>(alphabet_), 1.0 / alphabet_);
  }

 private:
  Obs observation() const {
    Obs obs(history_length(), kPad);
    std::copy(tokens_.begin(), tokens_.end(), obs.begin());
    return obs;
  }

  int word_length_;
  int alphabet_;
  int max_guesses_;
  double gamma_;
  std::vector<std::vector<int>> words_;
  std::vector<int> hidden_;
  std::vector<int> tokens_;
  std::vector<int> current_;
  int guesses_ = 0;
  bool finished_ = false;
};

inline MiniWordle build_mini_wordle(int word_length = 3, int alphabet = 5, int max_guesses = 4, double gamma = 0.95) {
  return MiniWordle(word_length, alphabet, max_guesses, gamma);
}

// ---------------------------------------------------------------------------
// Random MDPs for property tests.

struct RandomMdpOptions {
  double discount = 0.9;
  double behavior_floor = 0.05;
};

/// Seeded random MDP plus a full-support behavior policy. Each (s,a) moves to
/// `branching` distinct successors with Dirichlet(1) weights; rewards are
/// uniform on [0, 1-gamma] so every discounted return is at most one; the
/// initial distribution is uniform. The behavior policy is a Dirichlet(1)
/// draw mixed with the probability floor.
inline std::pair<TabularMdp, TabularPolicy> random_mdp(std::size_t num_states, std::size_t num_actions,
                                                       std::size_t branching, std::uint64_t seed,
                                                       RandomMdpOptions options = {}) {
  require(num_states >= 1 && num_actions >= 1, "random_mdp needs states and actions");
  require(branching >= 1 && branching <= num_states, "branching must lie in [1, num_states]");
  require(options.behavior_floor >= 0.0 && options.behavior_floor * static_cast<double>(num_actions) < 1.0,
          "behavior floor too large for the action count");
  Rng rng(splitmix64(seed));
  const std::size_t S = num_states, A = num_actions;
  std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0);
  std::vector<std::size_t> order(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t i = 0; i < S; ++i) order[i] = i;
      for (std::size_t i = 0; i < branching; ++i) std::swap(order[i], order[i + uniform_index(rng, S - i)]);
      std::vector<double> w(branching);
      double total = 0.0;
      for (auto& x : w) total += (x = exponential(rng));
      for (std::size_t i = 0; i < branching; ++i) P[(s * A + a) * S + order[i]] += w[i] / total;
      R[s * A + a] = uniform01(rng) * (1.0 - options.discount);
    }
  }
  TabularPolicy behavior(S, A, 0.0);
  const double floor = options.behavior_floor;
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> w(A);
    double total = 0.0;
    for (auto& x : w) total += (x = exponential(rng));
    for (std::size_t a = 0; a < A; ++a) behavior(s, a) = floor + (1.0 - floor * static_cast<double>(A)) * w[a] / total;
  }
  std::vector<double> init(S, 1.0 / static_cast<double>(S));
  return {TabularMdp(S, A, std::move(P), std::move(R), std::vector<bool>(S, false), std::move(init), options.discount),
          std::move(behavior)};
}

// ---------------------------------------------------------------------------
// Dataset generation by rolling out a mixture policy.

struct GeneratorPolicy {
  double epsilon = 0.5;  // weight on the scripted policy; the rest is uniform
  std::uint64_t seed = 0;

  std::vector<double> probs(const Env& env, const Obs& obs) const {
    auto p = env.scripted_policy(obs);
    const double uniform = (1.0 - epsilon) / static_cast<double>(env.num_actions());
    for (double& x : p) x = epsilon * x + uniform;
    return p;
  }
};

inline Dataset rollout_dataset(const Env& env, const GeneratorPolicy& policy, std::size_t n_episodes,
                               std::uint64_t seed) {
  require(n_episodes > 0, "rollout_dataset: n_episodes must be positive (empty dataset)");
  require(policy.epsilon >= 0.0 && policy.epsilon <= 1.0, "generator epsilon must lie in [0,1]");
  std::vector<std::vector<Transition>> episodes(n_episodes);
  const std::uint64_t stream_seed = seed ^ splitmix64(policy.seed);
  parallel_for(n_episodes, [&](std::size_t i) {
    auto local = env.clone();
    Rng rng = stream_rng(stream_seed, i);
    Obs obs = local->reset(rng);
    auto& out = episodes[i];
    for (int t = 0; t < local->horizon(); ++t) {
      const auto p = policy.probs(*local, obs);
      const int a = sample_index(p, rng);
      StepResult r = local->step(a, rng);
      Transition tr;
      tr.state = obs;
      tr.action = a;
      tr.reward = r.reward;
      tr.next_state = r.obs;
      tr.done = r.done || t + 1 == local->horizon();
      tr.traj_id = static_cast<int>(i);
      tr.step_index = t;
      out.push_back(std::move(tr));
      if (r.done) break;
      obs = std::move(r.obs);
    }
  });
  std::vector<Transition> all;
  for (auto& e : episodes)
    for (auto& t : e) all.push_back(std::move(t));

  DatasetMeta meta;
  meta.env = env.name();
  meta.gamma = env.discount();
  meta.seed = seed;
  meta.num_actions = static_cast<std::size_t>(env.num_actions());
  meta.num_states = env.num_states();
  meta.tabular = env.tabular();
  meta.epsilon = policy.epsilon;
  meta.params = env.params();
  Dataset dataset(std::move(all), std::move(meta));
  for (std::size_t i = 0; i < dataset.num_trajectories(); ++i)
    require(dataset.discounted_return(i, env.discount()) <= 1.0 + 1e-12,
            "generated trajectory violates the bounded-return assumption");
  return dataset;
}

// ---------------------------------------------------------------------------
// Named environment construction.

struct EnvSpec {
  std::string name;
  std::uint64_t seed = 0;
  double gamma = 0.95;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

inline std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  auto as_int = [&](const char* key, double fallback) { return static_cast<int>(spec.param(key, fallback)); };
  if (spec.name == "gridworld-stitch") {
    const GridWorld g = build_gridworld_stitch(as_int("width", 5), as_int("height", 5), spec.gamma);
    return std::make_unique<TabularEnv>(make_gridworld_env(g));
  }
  if (spec.name == "mini-wordle")
    return std::make_unique<MiniWordle>(as_int("word_len", 3), as_int("alphabet", 5), as_int("guesses", 4), spec.gamma);
  if (spec.name == "random-mdp") {
    const auto states = static_cast<std::size_t>(as_int("states", 10));
    const auto actions = static_cast<std::size_t>(as_int("actions", 3));
    const auto branching = static_cast<std::size_t>(as_int("branching", 3));
    const auto mdp_seed = static_cast<std::uint64_t>(spec.param("mdp_seed", static_cast<double>(spec.seed)));
    auto [mdp, behavior] = random_mdp(states, actions, std::min(branching, states), mdp_seed,
                                      {.discount = spec.gamma, .behavior_floor = 0.05});
    return std::make_unique<TabularEnv>("random-mdp", std::move(mdp), as_int("horizon", 50),
                                        std::map<std::string, double>{{"states", double(states)},
                                                                      {"actions", double(actions)},
                                                                      {"branching", double(branching)},
                                                                      {"mdp_seed", double(mdp_seed)},
                                                                      {"horizon", spec.param("horizon", 50)}});
  }
  throw InvalidArgument("unknown environment '" + spec.name + "'");
}

inline EnvSpec env_spec_from_meta(const DatasetMeta& meta) {
  return EnvSpec{.name = meta.env, .seed = meta.seed, .gamma = meta.gamma, .params = meta.params};
}

}  // namespace qsft
