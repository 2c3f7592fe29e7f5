#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"

using namespace qsft;

namespace {

// s0 -> s1 deterministically for every action; s1 is a bandit into terminal s2.
TabularMdp relay(double r0, double gamma) {
    constexpr std::size_t S = 3, A = 2;
    std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
        P[(0 * A + a) * S + 1] = 1.0;
        P[(1 * A + a) * S + 2] = 1.0;
        P[(2 * A + a) * S + 2] = 1.0;
        R[0 * A + a] = r0;
    }
    return TabularMdp(S, A, P, R, {false, false, true}, {1.0, 0.0, 0.0}, gamma);
}

TabularPolicy uniform_rows(std::size_t S, std::size_t A) { return uniform_policy(S, A); }

}  // namespace

TEST(TrueBackup, TerminalBanditIsReward) {
    const auto mdp = fixtures::terminal_bandit({0.9, 0.5, 0.1});
    const auto pi = uniform_rows(2, 3);
    LikelihoodTable p(2, 3, 1.0 / 3.0);
    const auto b = true_backup(p, pi, mdp);
    EXPECT_EQ(b(0, 0), 0.9);
    EXPECT_EQ(b(0, 1), 0.5);
    EXPECT_EQ(b(0, 2), 0.1);
}

TEST(TrueBackup, RatioIdentity) {
    const auto mdp = relay(0.1, 0.9);
    const auto pi = uniform_rows(3, 2);
    LikelihoodTable p(3, 2, 0.5);
    const auto b = true_backup(p, pi, mdp);
    EXPECT_NEAR(b(0, 0), 0.1 + 0.9, 1e-15);
    EXPECT_NEAR(b(0, 1), 0.1 + 0.9, 1e-15);
}

TEST(TrueBackup, WorkedValue) {
    const auto mdp = relay(0.2, 0.9);
    const auto pi = uniform_rows(3, 2);
    LikelihoodTable p(3, 2, 0.5);
    p(1, 0) = 0.3;  // ratio 0.6
    p(1, 1) = 0.2;  // ratio 0.4
    EXPECT_NEAR(true_backup(p, pi, mdp)(0, 0), 0.74, 1e-15);
}

TEST(TrueBackup, NoSupportedActionNamesState) {
    const auto mdp = relay(0.2, 0.9);
    TabularPolicy pi = uniform_rows(3, 2);
    pi(1, 0) = 1e-4;
    pi(1, 1) = 1.0 - 1e-4;
    LikelihoodTable p(3, 2, 0.5);
    EXPECT_NO_THROW(true_backup(p, pi, mdp));
    try {
        true_backup(p, pi, mdp, 0.9999 + 1e-3);
        FAIL() << "expected InvalidArgument";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("state 1"), std::string::npos);
    }
}

TEST(EmpiricalBackup, Examples) {
    Transition win, lose, mid;
    win.state = lose.state = mid.state = {0};
    win.next_state = lose.next_state = {1};
    mid.next_state = {1};
    win.done = lose.done = true;
    win.reward = 1.0;
    mid.reward = 0.0;
    LikelihoodTable p(2, 3, 0.0);
    p(1, 0) = 0.2;
    p(1, 1) = 0.4;
    p(1, 2) = 0.5;
    TabularPolicy pi(2, 3, 0.0);
    pi(1, 0) = 0.5;
    pi(1, 1) = 0.4995;
    pi(1, 2) = 0.0005;  // below the floor; its ratio of 1000 is ignored
    const std::vector<Transition> batch{win, lose, mid};
    const auto t = empirical_backup(batch, p, pi, 0.95);
    EXPECT_EQ(t[0], 1.0);
    EXPECT_EQ(t[1], 0.0);
    EXPECT_NEAR(t[2], 0.95 * 0.4 / 0.4995, 1e-15);

    const std::vector<double> pn{0.2, 0.4, 0.5}, pin{0.5, 0.5, 0.0005};
    EXPECT_NEAR(backup_target(0.0, false, 0.95, pn, pin, kDefaultRatioFloor), 0.76, 1e-15);
    EXPECT_EQ(backup_target(0.9, false, 0.95, pn, std::vector<double>{0.1, 0.1, 0.8}, kDefaultRatioFloor), 1.0);
}

TEST(FixedPoint, ThreeActionBandit) {
    const auto mdp = fixtures::terminal_bandit({0.9, 0.5, 0.1});
    const auto fp = fixed_point_iterate(mdp, uniform_rows(2, 3), 1e-12, 1000);
    EXPECT_NEAR(fp.p(0, 0), 0.8 / 1.5, 1e-12);
    EXPECT_NEAR(fp.p(0, 1), 0.5 / 1.5, 1e-12);
    EXPECT_NEAR(fp.p(0, 2), 0.2 / 1.5, 1e-12);
    EXPECT_NEAR(fp.p(0, 0) + fp.p(0, 1) + fp.p(0, 2), 1.0, 1e-12);
}

TEST(FixedPoint, TwoActionBandit) {
    const auto fp = fixed_point_iterate(fixtures::terminal_bandit({1.0, 0.0}), uniform_rows(2, 2), 1e-12, 1000);
    EXPECT_NEAR(fp.p(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(fp.p(0, 1), 0.0, 1e-12);
}

TEST(FixedPoint, ZeroRewardSpreadsBehavior) {
    // Every successor terminal: the backup is zero and only the spread term remains.
    const auto bandit = fixtures::terminal_bandit({0.0, 0.0, 0.0, 0.0});
    TabularPolicy behavior(2, 4, 0.25);
    const std::vector<double> row{0.1, 0.2, 0.3, 0.4};
    std::copy(row.begin(), row.end(), behavior.row(0).begin());
    const auto fp = fixed_point_iterate(bandit, behavior, 1e-13, 10000);
    for (std::size_t a = 0; a < 4; ++a) EXPECT_NEAR(fp.p(0, a), (1.0 - row[a]) / 3.0, 1e-12);

    // Uniform behavior on any reward-free MDP: the backup is gamma everywhere
    // and 1/|A| is fixed.
    auto [mdp, unused] = random_mdp(6, 4, 3, 5);
    const auto zero = mdp.with_rewards(std::vector<double>(24, 0.0));
    const auto uniform = fixed_point_iterate(zero, uniform_rows(6, 4), 1e-13, 10000);
    for (double x : uniform.p.values()) EXPECT_NEAR(x, 0.25, 1e-12);
}

TEST(FixedPoint, SingleActionIsAnError) {
    EXPECT_THROW(fixed_point_iterate(fixtures::terminal_bandit({0.5}), uniform_rows(2, 1), 1e-12, 10), InvalidArgument);
}

TEST(FixedPoint, RowsSelfNormalizeAndRunIsDeterministic) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [mdp, behavior] = random_mdp(4 + seed, 3 + seed % 3, 3, seed, {.discount = 0.95});
        const auto a = fixed_point_iterate(mdp, behavior, 1e-12, 200000);
        const auto b = fixed_point_iterate(mdp, behavior, 1e-12, 200000);
        EXPECT_EQ(a.p, b.p);
        LikelihoodTable image(a.p.num_states(), a.p.num_actions());
        recurrence_model(mdp, behavior, kDefaultRatioFloor).apply(a.p, image);
        EXPECT_LE(max_abs_difference(image, a.p), 1e-11);
        for (std::size_t s = 0; s < mdp.num_states(); ++s) {
            double sum = 0.0;
            for (double x : a.p.row(s)) {
                EXPECT_GE(x, -1e-12);
                EXPECT_LE(x, 1.0 + 1e-12);
                sum += x;
            }
            EXPECT_NEAR(sum, 1.0, 1e-8);
        }
    }
}

TEST(FixedPoint, ReportsNonConvergence) {
    auto [mdp, behavior] = random_mdp(8, 3, 3, 1, {.discount = 0.95});
    EXPECT_THROW(fixed_point_iterate(mdp, behavior, 1e-14, 2, {.stall_sweeps = 1000000, .max_pattern_rounds = 0}),
                 ConvergenceError);
}

TEST(FixedPoint, RecurrenceRowMatchesFormula) {
    const std::vector<double> pi{0.2, 0.3, 0.5}, backup{0.4, 1.7, -0.2};
    std::vector<double> out(3);
    recurrence_row(pi, backup, out);
    const double c[3] = {0.4, 1.0, 0.0};
    for (std::size_t a = 0; a < 3; ++a) {
        double expected = pi[a] * c[a];
        for (std::size_t b = 0; b < 3; ++b)
            if (b != a) expected += pi[b] * (1.0 - c[b]) / 2.0;
        EXPECT_NEAR(out[a], expected, 1e-15);
    }
}

TEST(Verify, BanditExample) {
    const auto mdp = fixtures::terminal_bandit({0.9, 0.5, 0.1});
    const auto r = verify_theorem1(mdp, uniform_rows(2, 3), {0}, 1e-6);
    ASSERT_EQ(r.entries.size(), 3u);
    EXPECT_TRUE(r.entries[0].qualifies);
    EXPECT_TRUE(r.entries[1].qualifies);
    EXPECT_FALSE(r.entries[2].qualifies);
    EXPECT_NEAR(r.entries[0].lower, 0.3, 1e-12);
    EXPECT_NEAR(r.entries[1].lower, 0.5 / 3.0, 1e-12);
    EXPECT_EQ(r.qualifying, 2u);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.lower_violations_all, 0u);
}

TEST(Verify, ZeroRewardIsVacuous) {
    auto [mdp, behavior] = random_mdp(5, 3, 2, 8);
    const auto r = verify_theorem1(mdp.with_rewards(std::vector<double>(15, 0.0)), behavior, all_states(5), 1e-6);
    EXPECT_EQ(r.qualifying, 0u);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.lower_violations_all, 0u);
}

TEST(Verify, TwoActionWarning) {
    const auto r = verify_theorem1(fixtures::terminal_bandit({1.0, 0.0}), uniform_rows(2, 2), {0}, 1e-6);
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_TRUE(r.passed());
    EXPECT_NEAR(r.entries[0].p_hat, 1.0, 1e-9);
}

TEST(Verify, OnlyListedStates) {
    auto [mdp, behavior] = random_mdp(10, 3, 3, 4);
    const auto r = verify_theorem1(mdp, behavior, {1, 3, 5}, 1e-6);
    EXPECT_EQ(r.entries.size(), 9u);
    for (const auto& e : r.entries) EXPECT_EQ(e.state % 2, 1u);
    const auto j = r.to_json();
    EXPECT_EQ(j.at("entries").size(), 9u);
    EXPECT_NE(r.to_table().find("qualifying="), std::string::npos);
}

TEST(Verify, LowerBoundHoldsOnRandomMdps) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto [mdp, behavior] = random_mdp(3 + seed % 10, 3 + seed % 3, 3, seed, {.discount = 0.9});
        const auto r = verify_theorem1(mdp, behavior, all_states(mdp.num_states()), 1e-6);
        EXPECT_EQ(r.lower_violations_all, 0u) << "seed " << seed;
        EXPECT_LE(r.max_row_sum_error, 1e-8);
    }
}

TEST(Verify, RaisingRewardsNeverLowersQualifyingLikelihoods) {
    std::size_t checked = 0, decreased = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto [mdp, behavior] = random_mdp(6, 3, 2, 100 + seed, {.discount = 0.9});
        std::vector<double> raised(mdp.num_states() * mdp.num_actions());
        Rng rng(seed);
        for (std::size_t s = 0; s < mdp.num_states(); ++s)
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
                const double r = mdp.reward(s, a);
                raised[s * mdp.num_actions() + a] = r + 0.1 * uniform01(rng) * (1.0 - r);
            }
        const auto base = verify_theorem1(mdp, behavior, all_states(6), 1e-6);
        const auto up = verify_theorem1(mdp.with_rewards(raised), behavior, all_states(6), 1e-6);
        for (std::size_t i = 0; i < base.entries.size(); ++i) {
            if (!base.entries[i].qualifies) continue;
            ++checked;
            const double drop = base.entries[i].p_hat - up.entries[i].p_hat;
            if (drop > 1e-9) ++decreased;
            worst = std::max(worst, drop);
        }
    }
    EXPECT_GT(checked, 0u);
    EXPECT_EQ(decreased, 0u) << "of " << checked << " qualifying entries; largest drop " << worst;
}

TEST(Extraction, BetaZeroIsIdentity) {
    const std::vector<double> p{0.9, 0.05, 0.05}, pi{0.2, 0.3, 0.5};
    const auto out = extract_distribution(p, pi, 0.0);
    for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(out[a], pi[a], 1e-15);
}

TEST(Extraction, WorkedValues) {
    const std::vector<double> p{1.0, 0.0}, pi{0.5, 0.5};
    const auto out = extract_distribution(p, pi, 1.0);
    EXPECT_NEAR(out[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
    EXPECT_NEAR(out[0], 0.7311, 1e-4);
    EXPECT_NEAR(out[1], 0.2689, 1e-4);
    const auto sharp = extract_distribution(p, pi, 1000.0);
    EXPECT_NEAR(sharp[0], 1.0, 1e-12);
    EXPECT_TRUE(std::isfinite(sharp[1]));
    EXPECT_THROW(extract_distribution(p, pi, -1.0), InvalidArgument);
}

TEST(Extraction, ArgmaxInvariantUnderUniformBehavior) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(5), pi(5, 0.2);
        for (auto& x : p) x = uniform01(rng);
        for (double beta : {0.01, 1.0, 8.0, 100.0})
            EXPECT_EQ(argmax(extract_distribution(p, pi, beta)), argmax(p));
    }
}

TEST(TabularQsft, ExhaustiveCoverageMatchesOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::size_t S = 6, A = 3;
        auto [mdp, unused] = random_mdp(S, A, 1, seed, {.discount = 0.9});
        Rng rng(seed);
        QTable counts(S, A);
        TabularPolicy behavior(S, A);
        for (std::size_t s = 0; s < S; ++s) {
            double n = 0.0;
            for (std::size_t a = 0; a < A; ++a) n += (counts(s, a) = 1.0 + static_cast<double>(uniform_index(rng, 5)));
            for (std::size_t a = 0; a < A; ++a) behavior(s, a) = counts(s, a) / n;
        }
        // One long trajectory holds every transition; a final step at an
        // extra state closes it.
        std::vector<Transition> ts;
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a)
                for (int k = 0; k < static_cast<int>(counts(s, a)); ++k) {
                    Transition t;
                    t.state = {static_cast<int>(s)};
                    t.action = static_cast<int>(a);
                    t.reward = mdp.reward(s, a);
                    const auto dist = mdp.next_state_dist(s, a);
                    t.next_state = {static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin())};
                    t.step_index = static_cast<int>(ts.size());
                    ts.push_back(t);
                }
        Transition last;
        last.state = last.next_state = {static_cast<int>(S)};
        last.done = true;
        last.step_index = static_cast<int>(ts.size());
        ts.push_back(last);

        TrainConfig config;
        config.gamma = 0.9;
        config.smoothing = 0.0;
        const auto result = tabular_qsft(Dataset(ts, {}), S + 1, A, config);
        const auto oracle = fixed_point_iterate(mdp, behavior, 1e-12, 200000);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t a = 0; a < A; ++a) EXPECT_NEAR(result.p(s, a), oracle.p(s, a), 1e-6);
        EXPECT_TRUE(result.uncovered_states.empty());
        for (const auto& [s, a] : result.uncovered_pairs) EXPECT_EQ(s, S);  // only the closing state
    }
}

TEST(TabularQsft, ReportsUncoveredStates) {
    const auto g = build_gridworld_stitch(5, 5);
    const auto d = gen_stitch_dataset(g, 40, 1);
    const auto result = tabular_qsft(d, 25, 4, TrainConfig{});
    EXPECT_FALSE(result.uncovered_states.empty());
    EXPECT_FALSE(result.uncovered_pairs.empty());
    EXPECT_EQ(result.covered_states.size() + result.uncovered_states.size(), 25u);
    for (std::size_t s : result.uncovered_states)
        for (std::size_t a = 0; a < 4; ++a) EXPECT_EQ(result.p(s, a), result.behavior(s, a));
    validate_policy(result.policy);
}

TEST(TabularQsft, StitchesGridworld) {
    const auto g = build_gridworld_stitch(5, 5);
    const auto d = gen_stitch_dataset(g, 1000, 0);
    TrainConfig config;
    config.beta = 8.0;
    const auto result = tabular_qsft(d, 25, 4, config);
    const auto env = make_gridworld_env(g);
    const TablePolicy policy(result.policy, "tabular-qsft");
    const auto report = rollout(env, policy, 10, 0, RolloutMode::kGreedy);
    EXPECT_NEAR(report.discounted().mean, std::pow(0.95, 7), 1e-12);
}

TEST(TabularQsft, HalfCoverageBoundsOnCoveredStates) {
    auto [mdp, behavior] = random_mdp(8, 3, 2, 21);
    const std::vector<std::size_t> covered{0, 1, 2, 3};
    const auto r = verify_theorem1(mdp, behavior, covered, 1e-6);
    std::set<std::size_t> seen;
    for (const auto& e : r.entries) seen.insert(e.state);
    EXPECT_EQ(seen, std::set<std::size_t>(covered.begin(), covered.end()));
}
