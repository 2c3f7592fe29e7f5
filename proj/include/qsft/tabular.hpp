#pragma once

// Bellman probability operators on finite MDPs, the fixed point of the
// weighted cross-entropy recurrence, the value bound check against Q*, and
// inference-time policy extraction.

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/common.hpp"
#include "qsft/mdp.hpp"

namespace qsft {

struct LikelihoodTag {};
using LikelihoodTable = StateActionTable<LikelihoodTag>;

inline constexpr double kDefaultRatioFloor = 1e-3;

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

struct RatioMax {
  double value = 0.0;
  int action = -1;  // -1 when no action clears the floor
};

/// max over a' of p(a')/pi(a'), restricted to pi(a') >= floor. Lowest action
/// wins ties.
inline RatioMax max_supported_ratio(std::span<const double> p, std::span<const double> pi, double floor) {
  require(p.size() == pi.size(), "likelihood and policy rows differ in length");
  RatioMax best;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (pi[a] < floor) continue;
    const double ratio = p[a] / pi[a];
    if (best.action < 0 || ratio > best.value) best = {ratio, static_cast<int>(a)};
  }
  return best;
}

namespace detail {

inline double checked_ratio(std::span<const double> p, std::span<const double> pi, double floor,
                            const std::string& where) {
  const RatioMax m = max_supported_ratio(p, pi, floor);
  if (m.action < 0) throw InvalidArgument("no action at " + where + " has behavior mass above the ratio floor");
  return m.value;
}

}  // namespace detail

/// Single-transition empirical target: r when done, otherwise
/// clamp(r + gamma * max supported ratio at the next state).
inline double backup_target(double reward, bool done, double gamma, std::span<const double> p_next,
                            std::span<const double> pi_next, double floor, const std::string& where = "next state") {
  if (done) return clamp01(reward);
  return clamp01(reward + gamma * detail::checked_ratio(p_next, pi_next, floor, where));
}

/// Unclamped expected backup B*p for every (s,a). Terminal states and
/// terminal successors contribute no bootstrap term.
inline QTable true_backup(const LikelihoodTable& p, const TabularPolicy& behavior, const TabularMdp& mdp,
                          double ratio_floor = kDefaultRatioFloor) {
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  require(p.num_states() == S && p.num_actions() == A, "likelihood table shape does not match mdp");
  require(behavior.num_states() == S && behavior.num_actions() == A, "behavior shape does not match mdp");
  std::vector<double> ratio(S, 0.0);
  std::vector<bool> needed(S, false);
  for (std::size_t s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (std::size_t a = 0; a < A; ++a) {
      const auto dist = mdp.next_state_dist(s, a);
      for (std::size_t n = 0; n < S; ++n)
        if (dist[n] > 0.0 && !mdp.terminal(n)) needed[n] = true;
    }
  }
  for (std::size_t n = 0; n < S; ++n)
    if (needed[n]) ratio[n] = detail::checked_ratio(p.row(n), behavior.row(n), ratio_floor, "state " + std::to_string(n));

  const double gamma = mdp.discount();
  QTable backup(S, A, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double value = mdp.reward(s, a);
      if (!mdp.terminal(s)) {
        const auto dist = mdp.next_state_dist(s, a);
        double expected = 0.0;
        for (std::size_t n = 0; n < S; ++n) expected += dist[n] * ratio[n];
        value += gamma * expected;
      }
      backup(s, a) = value;
    }
  }
  return backup;
}

/// One row of the recurrence:
///   out(a) = pi(a) c(a) + sum_{a' != a} pi(a') (1 - c(a')) / (A - 1)
/// with c = clamp(backup). `pi` may be unnormalized counts/frequencies.
inline void recurrence_row(std::span<const double> pi, std::span<const double> backup, std::span<double> out) {
  const std::size_t A = pi.size();
  require(A >= 2, "the recurrence needs at least two actions");
  double leftover = 0.0;
  for (std::size_t a = 0; a < A; ++a) leftover += pi[a] * (1.0 - clamp01(backup[a]));
  const double spread = 1.0 / static_cast<double>(A - 1);
  for (std::size_t a = 0; a < A; ++a) {
    const double c = clamp01(backup[a]);
    out[a] = pi[a] * c + (leftover - pi[a] * (1.0 - c)) * spread;
  }
}

struct FixedPointOptions {
  double ratio_floor = kDefaultRatioFloor;
  // The plain iteration can settle into a limit cycle. When the residual has
  // not improved for `patience` sweeps the step is halved:
  // p <- (1 - eta) p + eta T(p). Fixed points are unchanged.
  std::size_t patience = 100;
  double min_step = 1.0 / 1024.0;
  // Sweeps spent at the smallest step before switching to the exact
  // piecewise-affine solve.
  std::size_t stall_sweeps = 2000;
  std::size_t max_pattern_rounds = 200;
};

struct FixedPointResult {
  LikelihoodTable p;
  std::size_t iterations = 0;
  double residual = 0.0;  // sup-norm of T(p) - p at the returned table
  double step = 1.0;      // final damping step
  bool exact_solve = false;
  std::vector<double> residuals;
};

/// The recurrence in a form shared by the exact operator and the count-based
/// estimate:
///   B(s,a) = reward(s,a) + gamma * sum_j w_j ratio(next_j)
///   ratio(n) = max_{a': denom(n,a') >= floor} p(n,a') / denom(n,a')
///   T(p)(s,·) = recurrence_row(weights(s,·), B(s,·))   on active states
/// Inactive states keep their initial row and never appear as successors.
struct RecurrenceModel {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  double gamma = 0.0;
  double ratio_floor = kDefaultRatioFloor;
  std::vector<bool> active;
  TabularPolicy weights;
  TabularPolicy denom;
  QTable reward;
  std::vector<std::vector<std::pair<std::size_t, double>>> successors;  // per (s,a)
  LikelihoodTable initial;

  const std::vector<std::pair<std::size_t, double>>& next(std::size_t s, std::size_t a) const {
    return successors[s * num_actions + a];
  }

  std::vector<bool> needed_states() const {
    std::vector<bool> needed(num_states, false);
    for (const auto& list : successors)
      for (const auto& [n, w] : list) needed[n] = true;
    return needed;
  }

  QTable backup(const LikelihoodTable& p) const {
    const auto needed = needed_states();
    std::vector<double> ratio(num_states, 0.0);
    for (std::size_t n = 0; n < num_states; ++n)
      if (needed[n]) ratio[n] = detail::checked_ratio(p.row(n), denom.row(n), ratio_floor, "state " + std::to_string(n));
    QTable b(num_states, num_actions, 0.0);
    for (std::size_t s = 0; s < num_states; ++s) {
      if (!active[s]) continue;
      for (std::size_t a = 0; a < num_actions; ++a) {
        double boot = 0.0;
        for (const auto& [n, w] : next(s, a)) boot += w * ratio[n];
        b(s, a) = reward(s, a) + gamma * boot;
      }
    }
    return b;
  }

  void apply(const LikelihoodTable& p, LikelihoodTable& out) const {
    const QTable b = backup(p);
    for (std::size_t s = 0; s < num_states; ++s) {
      if (active[s]) recurrence_row(weights.row(s), b.row(s), out.row(s));
      else std::copy(p.row(s).begin(), p.row(s).end(), out.row(s).begin());
    }
  }
};

namespace detail {

inline double sup_distance(const LikelihoodTable& x, const LikelihoodTable& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.values().size(); ++i) m = std::max(m, std::abs(x.values()[i] - y.values()[i]));
  return m;
}

// Solves M x = rhs in place by Gaussian elimination with partial pivoting.
inline bool solve_dense(std::vector<double>& M, std::vector<double>& rhs, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(M[r * n + col]) > std::abs(M[pivot * n + col])) pivot = r;
    if (std::abs(M[pivot * n + col]) < 1e-14) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(M[col * n + c], M[pivot * n + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = M[r * n + col] / M[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) M[r * n + c] -= f * M[col * n + c];
      rhs[r] -= f * rhs[col];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= M[r * n + c] * rhs[c];
    rhs[r] = acc / M[r * n + r];
  }
  return true;
}

// Fixes the maximizing action at every successor and the clamp status of
// every backup as they are at `guess`; the recurrence is then affine in p and
// its fixed point solves a linear system.
inline std::optional<LikelihoodTable> solve_pattern(const RecurrenceModel& m, const LikelihoodTable& guess) {
  const std::size_t S = m.num_states, A = m.num_actions;
  const auto needed = m.needed_states();
  std::vector<int> choice(S, -1);
  for (std::size_t n = 0; n < S; ++n)
    if (needed[n]) choice[n] = max_supported_ratio(guess.row(n), m.denom.row(n), m.ratio_floor).action;
  const QTable b = m.backup(guess);

  std::vector<std::size_t> index(S, 0);
  std::size_t rows = 0;
  for (std::size_t s = 0; s < S; ++s)
    if (m.active[s]) index[s] = rows++;
  const std::size_t n = rows * A;
  auto var = [&](std::size_t s, std::size_t a) { return index[s] * A + a; };
  std::vector<double> M(n * n, 0.0), rhs(n, 0.0);
  const double k = 1.0 / static_cast<double>(A - 1);
  for (std::size_t s = 0; s < S; ++s) {
    if (!m.active[s]) continue;
    const auto pi = m.weights.row(s);
    double total = 0.0;
    for (double x : pi) total += x;
    for (std::size_t a = 0; a < A; ++a) {
      // p(s,a) - T(s,a) = 0 with T(s,a) = k (total - pi_a) + sum_a' coef_a' c(s,a').
      const std::size_t row = var(s, a);
      M[row * n + row] += 1.0;
      rhs[row] += k * (total - pi[a]);
      for (std::size_t a2 = 0; a2 < A; ++a2) {
        const double coef = (a2 == a ? pi[a] * (1.0 + k) : 0.0) - k * pi[a2];
        if (coef == 0.0) continue;
        if (b(s, a2) >= 1.0) {
          rhs[row] += coef;
          continue;
        }
        rhs[row] += coef * m.reward(s, a2);
        for (const auto& [next, w] : m.next(s, a2)) {
          const auto j = static_cast<std::size_t>(choice[next]);
          M[row * n + var(next, j)] -= coef * m.gamma * w / m.denom(next, j);
        }
      }
    }
  }
  if (!solve_dense(M, rhs, n)) return std::nullopt;
  LikelihoodTable p = m.initial;
  for (std::size_t s = 0; s < S; ++s)
    if (m.active[s])
      for (std::size_t a = 0; a < A; ++a) p(s, a) = rhs[var(s, a)];
  return p;
}

}  // namespace detail

/// Damped iteration from the model's initial table. If the residual stalls at
/// the smallest step, switches to exact solves over the piecewise-affine
/// pieces; any answer is accepted only when |T(p) - p| <= tol under the full
/// operator.
inline FixedPointResult solve_recurrence(const RecurrenceModel& m, double tol, std::size_t max_iters,
                                         const FixedPointOptions& options, const std::string& name) {
  require(tol > 0.0, name + ": tol must be positive");
  require(m.num_actions >= 2, name + ": a single action leaves the (|A|-1) denominator undefined");
  LikelihoodTable p = m.initial;
  LikelihoodTable next(m.num_states, m.num_actions, 0.0);
  FixedPointResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0, at_min = 0;
  double eta = 1.0;
  auto finish = [&](LikelihoodTable table, double residual, std::size_t iterations, bool exact) {
    result.p = std::move(table);
    result.iterations = iterations;
    result.residual = residual;
    result.step = eta;
    result.exact_solve = exact;
    return result;
  };
  auto try_exact = [&](std::size_t it) -> std::optional<FixedPointResult> {
    LikelihoodTable guess = p;
    for (std::size_t round = 0; round < options.max_pattern_rounds; ++round) {
      auto solved = detail::solve_pattern(m, guess);
      if (!solved) return std::nullopt;
      LikelihoodTable image(m.num_states, m.num_actions, 0.0);
      m.apply(*solved, image);
      const double residual = detail::sup_distance(image, *solved);
      if (residual <= tol) return finish(std::move(image), residual, it, true);
      if (solved->values() == guess.values()) return std::nullopt;
      guess = std::move(*solved);
    }
    return std::nullopt;
  };

  for (std::size_t it = 0; it < max_iters; ++it) {
    m.apply(p, next);
    const double residual = detail::sup_distance(next, p);
    result.residuals.push_back(residual);
    if (residual <= tol) return finish(std::move(next), residual, it + 1, false);
    if (residual < best) {
      best = residual;
      since_best = 0;
    } else if (++since_best >= options.patience && eta > options.min_step) {
      eta = std::max(options.min_step, eta * 0.5);
      since_best = 0;
      best = residual;
    }
    if (eta <= options.min_step && ++at_min == options.stall_sweeps) {
      if (auto exact = try_exact(it + 1)) return *exact;
    }
    for (std::size_t s = 0; s < m.num_states; ++s)
      for (std::size_t a = 0; a < m.num_actions; ++a) p(s, a) = (1.0 - eta) * p(s, a) + eta * next(s, a);
  }
  if (auto exact = try_exact(max_iters)) return *exact;
  throw ConvergenceError(name + " did not converge", result.residuals.back(), max_iters);
}

inline RecurrenceModel recurrence_model(const TabularMdp& mdp, const TabularPolicy& behavior, double ratio_floor) {
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  require(behavior.num_states() == S && behavior.num_actions() == A, "behavior shape does not match mdp");
  RecurrenceModel m;
  m.num_states = S;
  m.num_actions = A;
  m.gamma = mdp.discount();
  m.ratio_floor = ratio_floor;
  m.active.assign(S, true);
  m.weights = behavior;
  m.denom = behavior;
  m.reward = QTable(S, A, 0.0);
  m.successors.resize(S * A);
  m.initial = LikelihoodTable(S, A, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      m.initial(s, a) = behavior(s, a);
      m.reward(s, a) = mdp.reward(s, a);
      if (mdp.terminal(s)) continue;
      const auto dist = mdp.next_state_dist(s, a);
      for (std::size_t n = 0; n < S; ++n)
        if (dist[n] > 0.0 && !mdp.terminal(n)) m.successors[s * A + a].emplace_back(n, dist[n]);
    }
  }
  return m;
}

inline FixedPointResult fixed_point_iterate(const TabularMdp& mdp, const TabularPolicy& behavior, double tol,
                                            std::size_t max_iters, FixedPointOptions options = {}) {
  require(mdp.num_actions() >= 2, "fixed_point_iterate: a single action leaves the (|A|-1) denominator undefined");
  validate_policy(behavior);
  return solve_recurrence(recurrence_model(mdp, behavior, options.ratio_floor), tol, max_iters, options,
                          "fixed_point_iterate");
}

/// Per-transition targets for a batch under a tabular likelihood (target
/// copy) and behavior estimate.
inline std::vector<double> empirical_backup(std::span<const Transition> batch, const LikelihoodTable& target_p,
                                            const TabularPolicy& behavior_est, double gamma,
                                            double ratio_floor = kDefaultRatioFloor) {
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto& t : batch) {
    if (t.done) {
      targets.push_back(clamp01(t.reward));
      continue;
    }
    const auto n = static_cast<std::size_t>(t.next_state_id());
    require(n < target_p.num_states(), "next state id out of range");
    targets.push_back(backup_target(t.reward, false, gamma, target_p.row(n), behavior_est.row(n), ratio_floor,
                                    "state " + std::to_string(n)));
  }
  return targets;
}

/// pi_hat(a) proportional to pi(a) exp(beta p(a)), evaluated in log space.
inline std::vector<double> extract_distribution(std::span<const double> p, std::span<const double> pi, double beta) {
  require(beta >= 0.0, "extraction temperature beta must be nonnegative");
  require(p.size() == pi.size() && !p.empty(), "likelihood and policy rows differ in length");
  std::vector<double> logits(p.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < p.size(); ++a) {
    logits[a] = pi[a] > 0.0 ? std::log(pi[a]) + beta * p[a] : -std::numeric_limits<double>::infinity();
    top = std::max(top, logits[a]);
  }
  require(std::isfinite(top), "behavior row has no mass");
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - top));
  for (double& l : logits) l /= total;
  return logits;
}

inline TabularPolicy extract_policy(const LikelihoodTable& p, const TabularPolicy& behavior, double beta) {
  require(p.num_states() == behavior.num_states() && p.num_actions() == behavior.num_actions(),
          "likelihood and behavior shapes differ");
  TabularPolicy out(p.num_states(), p.num_actions(), 0.0);
  for (std::size_t s = 0; s < p.num_states(); ++s) {
    const auto row = extract_distribution(p.row(s), behavior.row(s), beta);
    std::copy(row.begin(), row.end(), out.row(s).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value bound report.

struct BoundEntry {
  std::size_t state = 0;
  std::size_t action = 0;
  double q_star = 0.0;
  double p_hat = 0.0;
  double lower = 0.0;            // pi_beta * Q*
  double backup = 0.0;           // B* p_hat, unclamped
  bool qualifies = false;        // Q* >= 1/(|A|-1)
  bool backup_qualifies = false; // B* p_hat >= 1/(|A|-1)
  bool upper_ok = true;          // Q* + tol >= p_hat
  bool lower_ok = true;          // p_hat + tol >= pi_beta * Q*
};

struct BoundReport {
  std::string label;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  double discount = 0.0;
  double tol = 0.0;
  std::vector<BoundEntry> entries;

  std::size_t qualifying = 0;
  std::size_t upper_violations = 0;        // qualifying actions
  std::size_t lower_violations = 0;        // qualifying actions
  std::size_t lower_violations_all = 0;    // every action
  double max_upper_violation = 0.0;
  double max_lower_violation = 0.0;
  double max_row_sum_error = 0.0;          // all states
  std::size_t clamp_active = 0;            // entries with B* p_hat > 1
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<std::string> warnings;

  bool passed() const { return upper_violations == 0 && lower_violations == 0; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["gamma"] = discount;
    j["tol"] = tol;
    j["qualifying"] = qualifying;
    j["upper_violations"] = upper_violations;
    j["lower_violations"] = lower_violations;
    j["lower_violations_all_actions"] = lower_violations_all;
    j["max_upper_violation"] = max_upper_violation;
    j["max_lower_violation"] = max_lower_violation;
    j["max_row_sum_error"] = max_row_sum_error;
    j["clamp_active"] = clamp_active;
    j["iterations"] = iterations;
    j["residual"] = residual;
    j["warnings"] = warnings;
    j["passed"] = passed();
    auto& rows = j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
      rows.push_back({{"s", e.state},
                      {"a", e.action},
                      {"q_star", e.q_star},
                      {"p_hat", e.p_hat},
                      {"lower", e.lower},
                      {"backup", e.backup},
                      {"qualifies", e.qualifies},
                      {"backup_qualifies", e.backup_qualifies},
                      {"upper_ok", e.upper_ok},
                      {"lower_ok", e.lower_ok}});
    }
    return j;
  }

  std::string to_table() const {
    std::ostringstream out;
    char line[160];
    out << label << "  |S|=" << num_states << " |A|=" << num_actions << " gamma=" << discount << "\n";
    std::snprintf(line, sizeof line, "%5s %3s %10s %10s %10s %4s %5s %5s\n", "s", "a", "Q*", "p_hat", "pi*Q*",
                  "qual", "upper", "lower");
    out << line;
    for (const auto& e : entries) {
      std::snprintf(line, sizeof line, "%5zu %3zu %10.6f %10.6f %10.6f %4s %5s %5s\n", e.state, e.action, e.q_star,
                    e.p_hat, e.lower, e.qualifies ? "yes" : "no", e.upper_ok ? "ok" : "FAIL",
                    e.lower_ok ? "ok" : "FAIL");
      out << line;
    }
    out << "qualifying=" << qualifying << " upper_violations=" << upper_violations
        << " lower_violations=" << lower_violations << " lower_violations(all)=" << lower_violations_all
        << " max_upper_violation=" << max_upper_violation << " clamp_active=" << clamp_active << "\n";
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    return out.str();
  }
};

inline std::vector<std::size_t> all_states(std::size_t n) {
  std::vector<std::size_t> states(n);
  for (std::size_t s = 0; s < n; ++s) states[s] = s;
  return states;
}

struct VerifyOptions {
  FixedPointOptions fixed_point;
  std::size_t max_iters = 200000;
  double value_tol = 1e-12;
};

/// Checks Q* >= p_hat >= pi_beta Q* (up to tol) on the listed states, for
/// actions with Q* >= 1/(|A|-1); the lower bound is also recorded for all
/// actions.
inline BoundReport verify_theorem1(const TabularMdp& mdp, const TabularPolicy& behavior,
                                   const std::vector<std::size_t>& states, double tol, VerifyOptions options = {}) {
  require(tol >= 0.0, "verify: tol must be nonnegative");
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  const QTable q = value_iteration(mdp, options.value_tol);
  const FixedPointResult fp = fixed_point_iterate(mdp, behavior, options.value_tol, options.max_iters, options.fixed_point);
  const QTable backup = true_backup(fp.p, behavior, mdp, options.fixed_point.ratio_floor);
  const double threshold = 1.0 / static_cast<double>(A - 1);

  BoundReport report;
  report.num_states = S;
  report.num_actions = A;
  report.discount = mdp.discount();
  report.tol = tol;
  report.iterations = fp.iterations;
  report.residual = fp.residual;
  if (A == 2)
    report.warnings.push_back("|A|=2: qualification needs Q* >= 1, so the upper bound is nearly vacuous");
  for (std::size_t s = 0; s < S; ++s) {
    double sum = 0.0;
    for (double x : fp.p.row(s)) sum += x;
    report.max_row_sum_error = std::max(report.max_row_sum_error, std::abs(sum - 1.0));
  }
  for (std::size_t s : states) {
    require(s < S, "verify: state id out of range");
    for (std::size_t a = 0; a < A; ++a) {
      BoundEntry e;
      e.state = s;
      e.action = a;
      e.q_star = q(s, a);
      e.p_hat = fp.p(s, a);
      e.lower = behavior(s, a) * q(s, a);
      e.backup = backup(s, a);
      e.qualifies = e.q_star >= threshold;
      e.backup_qualifies = e.backup >= threshold;
      e.upper_ok = e.q_star + tol >= e.p_hat;
      e.lower_ok = e.p_hat + tol >= e.lower;
      if (e.backup > 1.0) ++report.clamp_active;
      if (!e.lower_ok) ++report.lower_violations_all;
      if (e.qualifies) {
        ++report.qualifying;
        if (!e.upper_ok) {
          ++report.upper_violations;
          report.max_upper_violation = std::max(report.max_upper_violation, e.p_hat - e.q_star);
        }
        if (!e.lower_ok) {
          ++report.lower_violations;
          report.max_lower_violation = std::max(report.max_lower_violation, e.lower - e.p_hat);
        }
      }
      report.entries.push_back(e);
    }
  }
  return report;
}

}  // namespace qsft
