#pragma once

// Value bound check over a family of seeded random MDPs.

#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/envs.hpp"
#include "qsft/tabular.hpp"

namespace qsft {

struct SuiteOptions {
  std::size_t num_mdps = 100;
  std::uint64_t seed = 0;
  std::size_t max_states = 20;
  std::size_t min_actions = 3;
  std::size_t max_actions = 5;
  std::vector<double> gammas{0.9, 0.95};
  std::size_t branching = 3;
  double behavior_floor = 0.05;
  double tol = 1e-6;
  VerifyOptions verify;

  void validate() const {
    require(num_mdps > 0, "verify: need at least one MDP");
    require(max_states >= 2, "verify: max_states must be at least 2");
    require(min_actions >= 2 && min_actions <= max_actions, "verify: action range must satisfy 2 <= lo <= hi");
    require(!gammas.empty(), "verify: need at least one discount");
    for (double g : gammas) require(g >= 0.0 && g < 1.0, "verify: discounts must lie in [0,1)");
    require(branching >= 1, "verify: branching must be positive");
    require(tol >= 0.0, "verify: tol must be nonnegative");
  }
};

struct SuiteCase {
  std::uint64_t mdp_seed = 0;
  BoundReport report;
};

struct SuiteReport {
  SuiteOptions options;
  std::vector<SuiteCase> cases;

  std::size_t upper_violations() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.upper_violations;
    return n;
  }
  std::size_t lower_violations() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.lower_violations;
    return n;
  }
  std::size_t lower_violations_all() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.lower_violations_all;
    return n;
  }
  std::size_t violating_mdps() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.passed() ? 0 : 1;
    return n;
  }
  double max_upper_violation() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max(m, c.report.max_upper_violation);
    return m;
  }
  double max_row_sum_error() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max(m, c.report.max_row_sum_error);
    return m;
  }
  std::size_t qualifying() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.qualifying;
    return n;
  }
  std::size_t clamp_active() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.report.clamp_active;
    return n;
  }
  bool bounds_hold() const { return upper_violations() == 0 && lower_violations() == 0; }
  bool rows_normalized(double tol = 1e-8) const { return max_row_sum_error() <= tol; }
  bool passed() const { return bounds_hold() && rows_normalized(); }

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (options.min_actions == 2)
      out.push_back("|A|=2 cases: qualification needs Q* >= 1, so the upper bound is nearly vacuous there");
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["num_mdps"] = cases.size();
    j["seed"] = options.seed;
    j["tol"] = options.tol;
    j["qualifying"] = qualifying();
    j["upper_violations"] = upper_violations();
    j["lower_violations"] = lower_violations();
    j["lower_violations_all_actions"] = lower_violations_all();
    j["violating_mdps"] = violating_mdps();
    j["max_upper_violation"] = max_upper_violation();
    j["max_row_sum_error"] = max_row_sum_error();
    j["clamp_active"] = clamp_active();
    j["passed"] = passed();
    j["warnings"] = warnings();
    auto& violations = j["violations"] = nlohmann::json::array();
    for (const auto& c : cases)
      for (const auto& e : c.report.entries)
        if (e.qualifies && !(e.upper_ok && e.lower_ok))
          violations.push_back({{"mdp_seed", c.mdp_seed}, {"mdp", c.report.label}, {"s", e.state}, {"a", e.action},
                                {"q_star", e.q_star}, {"p_hat", e.p_hat}, {"lower", e.lower}});
    auto& mdps = j["mdps"] = nlohmann::json::array();
    for (const auto& c : cases) {
      auto r = c.report.to_json();
      r["mdp_seed"] = c.mdp_seed;
      mdps.push_back(std::move(r));
    }
    return j;
  }

  std::string to_table() const {
    std::ostringstream out;
    out << "mdp  seed                  |S| |A| gamma  qualifying  upper_viol  lower_viol  max_upper_viol  iters\n";
    char line[200];
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& r = cases[i].report;
      std::snprintf(line, sizeof line, "%3zu  %-20llu %3zu %3zu %5.2f  %10zu  %10zu  %10zu  %14.3e  %5zu\n", i,
                    static_cast<unsigned long long>(cases[i].mdp_seed), r.num_states, r.num_actions, r.discount,
                    r.qualifying, r.upper_violations, r.lower_violations, r.max_upper_violation, r.iterations);
      out << line;
    }
    out << "total: qualifying=" << qualifying() << " upper_violations=" << upper_violations()
        << " lower_violations=" << lower_violations() << " (all actions: " << lower_violations_all() << ")"
        << " violating_mdps=" << violating_mdps() << " max_row_sum_error=" << max_row_sum_error() << "\n";
    for (const auto& w : warnings()) out << "warning: " << w << "\n";
    return out.str();
  }
};

/// The i-th MDP of a suite: size, action count and discount are derived
/// from (seed, i); every state counts as covered.
inline SuiteReport run_bound_suite(const SuiteOptions& options) {
  options.validate();
  SuiteReport suite;
  suite.options = options;
  suite.cases.resize(options.num_mdps);
  const std::size_t action_span = options.max_actions - options.min_actions + 1;
  parallel_for(options.num_mdps, [&](std::size_t i) {
    Rng rng = stream_rng(options.seed, i);
    const std::size_t S = 2 + uniform_index(rng, options.max_states - 1);
    const std::size_t A = options.min_actions + i % action_span;
    const double gamma = options.gammas[i % options.gammas.size()];
    const std::uint64_t mdp_seed = splitmix64(options.seed * 1000003ULL + i);
    auto [mdp, behavior] = random_mdp(S, A, std::min(options.branching, S), mdp_seed,
                                      {.discount = gamma, .behavior_floor = options.behavior_floor});
    SuiteCase c;
    c.mdp_seed = mdp_seed;
    c.report = verify_theorem1(mdp, behavior, all_states(S), options.tol, options.verify);
    c.report.label = "mdp" + std::to_string(i);
    suite.cases[i] = std::move(c);
  });
  return suite;
}

}  // namespace qsft
