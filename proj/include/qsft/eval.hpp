#pragma once

// Policy rollouts and report tables.

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/envs.hpp"
#include "qsft/policy.hpp"

namespace qsft {

enum class RolloutMode { kSample, kGreedy };

inline std::string to_string(RolloutMode mode) { return mode == RolloutMode::kSample ? "sample" : "greedy"; }

inline RolloutMode parse_mode(const std::string& text) {
  if (text == "sample") return RolloutMode::kSample;
  if (text == "greedy") return RolloutMode::kGreedy;
  throw InvalidArgument("mode must be 'sample' or 'greedy', got '" + text + "'");
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return out;
}

/// Action counts per visited observation.
using VisitCounts = std::map<Obs, std::vector<double>>;

struct EvalReport {
  std::string policy_id;
  std::string env_id;
  std::uint64_t seed = 0;
  RolloutMode mode = RolloutMode::kSample;
  std::vector<double> returns;             // undiscounted
  std::vector<double> discounted_returns;
  std::vector<int> successes;              // 0/1 per episode
  std::vector<int> lengths;
  VisitCounts visits;                      // filled when requested

  std::size_t episodes() const { return returns.size(); }
  MeanStderr undiscounted() const { return mean_stderr(returns); }
  MeanStderr discounted() const { return mean_stderr(discounted_returns); }
  double success_rate() const {
    if (successes.empty()) return 0.0;
    double total = 0.0;
    for (int s : successes) total += s;
    return total / static_cast<double>(successes.size());
  }

  nlohmann::json summary_json() const {
    const auto u = undiscounted(), d = discounted();
    return {{"policy", policy_id},  {"env", env_id},
            {"seed", seed},         {"mode", to_string(mode)},
            {"episodes", episodes()}, {"mean_return", u.mean},
            {"stderr_return", u.stderr_}, {"mean_discounted_return", d.mean},
            {"stderr_discounted_return", d.stderr_}, {"success_rate", success_rate()}};
  }

  std::string episodes_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "episode,return,discounted_return,success,length\n";
    for (std::size_t i = 0; i < episodes(); ++i)
      out << i << ',' << returns[i] << ',' << discounted_returns[i] << ',' << successes[i] << ',' << lengths[i] << '\n';
    return out.str();
  }
};

struct RolloutOptions {
  bool record_visits = false;
  unsigned threads = 0;
};

/// n episodes, each on its own RNG stream derived from (seed, episode index),
/// so results do not depend on scheduling.
inline EvalReport rollout(const Env& env, const Policy& policy, std::size_t n_episodes, std::uint64_t seed,
                          RolloutMode mode, RolloutOptions options = {}) {
  require(n_episodes > 0, "rollout: n_episodes must be positive");
  EvalReport report;
  report.policy_id = policy.id();
  report.env_id = env.name();
  report.seed = seed;
  report.mode = mode;
  report.returns.assign(n_episodes, 0.0);
  report.discounted_returns.assign(n_episodes, 0.0);
  report.successes.assign(n_episodes, 0);
  report.lengths.assign(n_episodes, 0);
  std::vector<std::vector<std::pair<Obs, int>>> visits(options.record_visits ? n_episodes : 0);
  const double gamma = env.discount();
  parallel_for(
      n_episodes,
      [&](std::size_t i) {
        auto local = env.clone();
        Rng rng = stream_rng(seed, i);
        Obs obs = local->reset(rng);
        EpisodeContext ctx;
        double discount = 1.0, disc_total = 0.0;
        int t = 0;
        bool success = false;
        for (; t < local->horizon(); ++t) {
          const auto probs = policy.action_probs(obs, ctx);
          if (probs.size() != static_cast<std::size_t>(local->num_actions()))
            throw InvalidArgument(policy.id() + ": wrong action count at a visited state");
          const int a = mode == RolloutMode::kGreedy ? argmax(probs) : sample_index(probs, rng);
          if (options.record_visits) visits[i].emplace_back(obs, a);
          StepResult r = local->step(a, rng);
          ctx.return_so_far += r.reward;
          disc_total += discount * r.reward;
          discount *= gamma;
          obs = std::move(r.obs);
          if (r.done) {
            success = r.success;
            ++t;
            break;
          }
        }
        report.returns[i] = ctx.return_so_far;
        report.discounted_returns[i] = disc_total;
        report.successes[i] = success ? 1 : 0;
        report.lengths[i] = t;
      },
      options.threads);
  const auto A = static_cast<std::size_t>(env.num_actions());
  for (const auto& episode : visits)
    for (const auto& [obs, a] : episode) {
      auto& row = report.visits[obs];
      if (row.empty()) row.assign(A, 0.0);
      row[static_cast<std::size_t>(a)] += 1.0;
    }
  return report;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "distributions differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(p[i] - q[i]);
  return 0.5 * total;
}

// ---------------------------------------------------------------------------

struct ComparisonRow {
  std::string policy;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  MeanStderr undiscounted;
  MeanStderr discounted;
  double success_rate = 0.0;
  double diff_vs_first = 0.0;  // undiscounted mean minus the first row's
};

struct ComparisonTable {
  std::string env;
  std::vector<ComparisonRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(10);
    out << "env,policy,mode,seed,episodes,mean_return,stderr_return,mean_discounted_return,"
           "stderr_discounted_return,success_rate,diff_vs_first\n";
    for (const auto& r : rows)
      out << env << ',' << r.policy << ',' << r.mode << ',' << r.seed << ',' << r.episodes << ','
          << r.undiscounted.mean << ',' << r.undiscounted.stderr_ << ',' << r.discounted.mean << ','
          << r.discounted.stderr_ << ',' << r.success_rate << ',' << r.diff_vs_first << '\n';
    return out.str();
  }

  std::string to_text() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %-7s %6s %8s  %-19s %-19s %8s %9s\n", "policy", "mode", "seed", "episodes",
                  "return", "discounted", "success", "diff");
    out << "env: " << env << "\n" << line;
    for (const auto& r : rows) {
      std::snprintf(line, sizeof line, "%-14s %-7s %6llu %8zu  %8.4f +- %-7.4f %8.4f +- %-7.4f %8.3f %+9.4f\n",
                    r.policy.c_str(), r.mode.c_str(), static_cast<unsigned long long>(r.seed), r.episodes,
                    r.undiscounted.mean, r.undiscounted.stderr_, r.discounted.mean, r.discounted.stderr_,
                    r.success_rate, r.diff_vs_first);
      out << line;
    }
    return out.str();
  }
};

inline ComparisonTable compare(const std::vector<EvalReport>& reports) {
  require(!reports.empty(), "compare: no reports");
  ComparisonTable table;
  table.env = reports.front().env_id;
  const double reference = reports.front().undiscounted().mean;
  for (const auto& r : reports) {
    require(r.env_id == table.env, "compare: reports come from different environments (" + table.env + ", " +
                                       r.env_id + ")");
    ComparisonRow row;
    row.policy = r.policy_id;
    row.mode = to_string(r.mode);
    row.seed = r.seed;
    row.episodes = r.episodes();
    row.undiscounted = r.undiscounted();
    row.discounted = r.discounted();
    row.success_rate = r.success_rate();
    row.diff_vs_first = row.undiscounted.mean - reference;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace qsft
