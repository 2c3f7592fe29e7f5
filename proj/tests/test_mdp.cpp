#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace qsft;

TEST(ValueIteration, TerminalBandit) {
    const auto q = value_iteration(fixtures::terminal_bandit({1.0, 0.0}), 1e-12);
    EXPECT_DOUBLE_EQ(q(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(q(0, 1), 0.0);
}

TEST(ValueIteration, ZeroDiscountIsReward) {
    auto [mdp, behavior] = random_mdp(6, 3, 2, 11, {.discount = 0.0});
    const auto q = value_iteration(mdp, 1e-12);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(q(s, a), mdp.reward(s, a));
}

TEST(ValueIteration, TwoStateChain) {
    const auto q = value_iteration(fixtures::two_state_chain(), 1e-12);
    EXPECT_NEAR(q(0, 0), 0.9, 1e-12);
    EXPECT_NEAR(q(0, 1), 0.2, 1e-12);
    EXPECT_NEAR(q(1, 0), 1.0, 1e-12);
    EXPECT_NEAR(q(1, 1), 0.0, 1e-12);
}

TEST(ValueIteration, ResidualShrinksEverySweep) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto [mdp, behavior] = random_mdp(12, 4, 3, seed, {.discount = 0.95});
        const auto trace = value_iteration_trace(mdp, 1e-10);
        for (std::size_t i = 1; i < trace.residuals.size(); ++i)
            EXPECT_LE(trace.residuals[i], trace.residuals[i - 1] + 1e-15);
        for (double x : trace.q.values()) {
            EXPECT_GE(x, 0.0);
            EXPECT_LE(x, 1.0);
        }
    }
}

TEST(ValueIteration, ReportsNonConvergence) {
    auto [mdp, behavior] = random_mdp(5, 3, 2, 1, {.discount = 0.99});
    try {
        value_iteration(mdp, 1e-12, 3);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 0.0);
        EXPECT_EQ(e.iterations(), 3u);
    }
}

TEST(PolicyQ, UniformOnChain) {
    const auto mdp = fixtures::two_state_chain();
    const auto q = policy_q(mdp, uniform_policy(3, 2), 1e-12);
    EXPECT_NEAR(q(0, 0), 0.45, 1e-12);
    EXPECT_NEAR(q(0, 1), 0.2, 1e-12);
}

TEST(PolicyQ, GreedyOptimalReproducesQStar) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto [mdp, behavior] = random_mdp(10, 3, 3, seed);
        const double tol = 1e-10;
        const auto q = value_iteration(mdp, tol);
        const auto qp = policy_q(mdp, greedy_policy(q), tol);
        EXPECT_LE(max_abs_difference(q, qp), 2 * tol);
    }
}

TEST(PolicyQ, TerminalBanditIgnoresPolicy) {
    const auto mdp = fixtures::terminal_bandit({0.3, 0.7});
    TabularPolicy pi(2, 2, 0.0);
    pi(0, 1) = 1.0;
    pi(1, 0) = 1.0;
    const auto q = policy_q(mdp, pi, 1e-12);
    EXPECT_DOUBLE_EQ(q(0, 0), 0.3);
    EXPECT_DOUBLE_EQ(q(0, 1), 0.7);
}

TEST(ExpectedReturn, Chain) {
    const auto mdp = fixtures::two_state_chain();
    EXPECT_NEAR(expected_return(mdp, greedy_policy(value_iteration(mdp, 1e-12))), 0.9, 1e-12);
    EXPECT_NEAR(expected_return(mdp, uniform_policy(3, 2)), 0.325, 1e-12);
    EXPECT_EQ(expected_return(mdp.with_initial_dist({0.0, 0.0, 1.0}), uniform_policy(3, 2)), 0.0);
}

TEST(TabularMdp, RejectsBadTransitionRows) {
    EXPECT_THROW(TabularMdp(1, 1, {0.5}, {0.0}, {false}, {1.0}, 0.9), InvalidArgument);
    EXPECT_THROW(TabularMdp(1, 1, {1.0}, {0.0}, {false}, {1.0}, 1.0), InvalidArgument);
}

TEST(ScaleRewards, TerminalRewardUnchanged) {
    const auto d = fixtures::bandit_dataset({0, 1}, {1.0, 0.0}, 2);
    auto [scaled, factor] = scale_rewards(d, 0.95);
    EXPECT_EQ(factor, 1.0);
    EXPECT_EQ(scaled.transitions(), d.transitions());
}

TEST(ScaleRewards, TwoUnitRewards) {
    std::vector<Transition> ts(2);
    for (int i = 0; i < 2; ++i) {
        ts[i].state = {0};
        ts[i].next_state = {0};
        ts[i].reward = 1.0;
        ts[i].step_index = i;
    }
    ts[1].done = true;
    const double gamma = 1.0 - 1e-9;
    auto [scaled, factor] = scale_rewards(Dataset(ts, {}), gamma);
    EXPECT_GE(factor, 2.0);
    EXPECT_LE(scaled.discounted_return(0, gamma), 1.0);
    EXPECT_EQ(scaled.meta().reward_scale, factor);
}

TEST(ScaleRewards, PreservesOrderAndZeros) {
    const auto zeros = fixtures::bandit_dataset({0, 1, 0}, {0.0, 0.0}, 2);
    EXPECT_EQ(scale_rewards(zeros, 0.9).second, 1.0);

    auto g = build_gridworld_stitch(5, 5);
    auto d = rollout_dataset(make_gridworld_env(g), GeneratorPolicy{.epsilon = 0.3}, 40, 3);
    std::vector<Transition> ts = d.transitions();
    for (auto& t : ts) t.reward *= 3.0;
    const Dataset big(ts, d.meta());
    auto [scaled, factor] = scale_rewards(big, 0.95);
    EXPECT_EQ(factor, 3.0);
    for (std::size_t i = 0; i + 1 < big.num_trajectories(); ++i) {
        EXPECT_LE(scaled.discounted_return(i, 0.95), 1.0 + 1e-12);
        EXPECT_EQ(big.undiscounted_return(i) < big.undiscounted_return(i + 1),
                  scaled.undiscounted_return(i) < scaled.undiscounted_return(i + 1));
    }
}

TEST(EmpiricalBehavior, Examples) {
    const auto d = fixtures::bandit_dataset({0, 0, 0, 1}, {0.0, 0.0}, 2);
    const auto pi = empirical_behavior_policy(d, 2, 2, 0.0);
    EXPECT_DOUBLE_EQ(pi(0, 0), 0.75);
    EXPECT_DOUBLE_EQ(pi(0, 1), 0.25);
    const auto smoothed = empirical_behavior_policy(d, 2, 2, 1.0);
    EXPECT_DOUBLE_EQ(smoothed(1, 0), 0.5);

    const auto nine = fixtures::bandit_dataset(std::vector<int>(9, 0), {0.0, 0.0, 0.0}, 3);
    const auto p3 = empirical_behavior_policy(nine, 2, 3, 1.0);
    EXPECT_DOUBLE_EQ(p3(0, 0), 10.0 / 12.0);
    EXPECT_DOUBLE_EQ(p3(0, 1), 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(p3(0, 2), 1.0 / 12.0);
}

TEST(EmpiricalBehavior, ConvergesToGeneratingPolicy) {
    const std::vector<double> truth{0.6, 0.3, 0.1};
    Rng rng(42);
    std::vector<int> actions(10000);
    for (auto& a : actions) a = sample_index(truth, rng);
    const auto pi = empirical_behavior_policy(fixtures::bandit_dataset(actions, {0, 0, 0}, 3), 2, 3, 0.1);
    double tv = 0.0;
    for (std::size_t a = 0; a < 3; ++a) tv += 0.5 * std::abs(pi(0, a) - truth[a]);
    EXPECT_LT(tv, 0.05);
}

TEST(Dataset, RejectsBrokenTrajectories) {
    Transition t;
    t.state = {0};
    t.next_state = {1};
    EXPECT_THROW(Dataset({t}, {}), InvalidArgument);  // no done
    t.done = true;
    Transition u = t;
    u.step_index = 1;
    EXPECT_THROW(Dataset({t, u}, {}), InvalidArgument);  // done before the end
    Transition v = t;
    v.traj_id = 1;
    v.step_index = 2;
    EXPECT_THROW(Dataset({t, v}, {}), InvalidArgument);  // step gap
}

TEST(DatasetIo, RoundTripTabularAndTokens) {
    fixtures::TempDir dir("io");
    const auto g = build_gridworld_stitch(5, 5);
    const auto grid = gen_stitch_dataset(g, 6, 9);
    write_dataset(grid, dir / "dataset.jsonl");
    EXPECT_TRUE(std::filesystem::exists(dir / "meta.json"));
    EXPECT_EQ(read_dataset(dir / "dataset.jsonl"), grid);

    const auto words = rollout_dataset(build_mini_wordle(), GeneratorPolicy{.epsilon = 0.5}, 8, 4);
    write_dataset(words, dir / "w.jsonl");
    EXPECT_TRUE(std::filesystem::exists(dir / "w.meta.json"));
    EXPECT_EQ(read_dataset(dir / "w.jsonl"), words);
}

TEST(DatasetIo, LineFormat) {
    const auto d = fixtures::bandit_dataset({1}, {0.0, 0.5}, 2);
    const auto j = nlohmann::json::parse(transition_to_jsonl(d.transitions()[0], true));
    EXPECT_EQ(j.at("traj_id"), 0);
    EXPECT_EQ(j.at("t"), 0);
    EXPECT_EQ(j.at("s"), 0);
    EXPECT_EQ(j.at("a"), 1);
    EXPECT_EQ(j.at("r"), 0.5);
    EXPECT_EQ(j.at("s2"), 1);
    EXPECT_EQ(j.at("done"), true);
}

TEST(DatasetIo, Errors) {
    fixtures::TempDir dir("ioerr");
    EXPECT_THROW(read_dataset(dir / "missing.jsonl"), IoError);
    {
        std::ofstream(dir / "bad.jsonl") << "{not json\n";
        std::ofstream(dir / "bad.meta.json") << "{}\n";
    }
    EXPECT_THROW(read_dataset(dir / "bad.jsonl"), InvalidArgument);
    const auto d = fixtures::bandit_dataset({0, 1}, {1.0, 0.0}, 2);
    write_dataset(d, dir / "d.jsonl");
    auto meta = nlohmann::json::parse(fixtures::read_file(dir / "d.meta.json"));
    meta["num_trajectories"] = 5;
    std::ofstream(dir / "d.meta.json") << meta.dump();
    EXPECT_THROW(read_dataset(dir / "d.jsonl"), InvalidArgument);
}
