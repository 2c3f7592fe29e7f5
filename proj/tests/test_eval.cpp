#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace qsft;

TEST(Rollout, OptimalGreedyAchievesOptimalValue) {
    const auto g = build_gridworld_stitch(5, 5);
    const auto env = make_gridworld_env(g);
    const TablePolicy optimal(greedy_policy(value_iteration(env.mdp(), 1e-12)), "optimal");
    const auto report = rollout(env, optimal, 20, 0, RolloutMode::kGreedy);
    for (double x : report.discounted_returns) EXPECT_NEAR(x, std::pow(0.95, 7), 1e-12);
    EXPECT_EQ(report.success_rate(), 1.0);
    EXPECT_EQ(report.lengths[0], 8);
}

TEST(Rollout, UniformBanditMean) {
    const TabularEnv env("bandit", fixtures::terminal_bandit({1.0, 0.0}), 1);
    const TablePolicy uniform(uniform_policy(2, 2), "uniform");
    const std::size_t n = 10000;
    const auto report = rollout(env, uniform, n, 3, RolloutMode::kSample);
    EXPECT_NEAR(report.undiscounted().mean, 0.5, 3.0 * 0.5 / std::sqrt(double(n)));
}

TEST(Rollout, DeterministicAndGreedySeedFree) {
    const TabularEnv grid = make_gridworld_env(build_gridworld_stitch(5, 5));
    const TablePolicy uniform(uniform_policy(grid.num_states(), 4), "uniform");
    const auto a = rollout(grid, uniform, 50, 9, RolloutMode::kSample);
    const auto b = rollout(grid, uniform, 50, 9, RolloutMode::kSample, {.threads = 1});
    EXPECT_EQ(a.returns, b.returns);
    EXPECT_EQ(a.lengths, b.lengths);

    const TablePolicy optimal(greedy_policy(value_iteration(grid.mdp(), 1e-12)), "optimal");
    EXPECT_EQ(rollout(grid, optimal, 5, 1, RolloutMode::kGreedy).returns,
              rollout(grid, optimal, 5, 2, RolloutMode::kGreedy).returns);
}

TEST(Rollout, SummaryStatisticsRecompute) {
    const TabularEnv env("bandit", fixtures::terminal_bandit({0.9, 0.4, 0.1}), 1);
    const TablePolicy uniform(uniform_policy(2, 3), "uniform");
    const auto report = rollout(env, uniform, 500, 4, RolloutMode::kSample);
    double sum = 0.0;
    for (double x : report.returns) sum += x;
    const double mean = sum / 500.0;
    double ss = 0.0;
    for (double x : report.returns) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(report.undiscounted().mean, mean, 1e-12);
    EXPECT_NEAR(report.undiscounted().stderr_, std::sqrt(ss / 499.0 / 500.0), 1e-12);

    const auto j = report.summary_json();
    EXPECT_EQ(j.at("episodes"), 500);
    EXPECT_EQ(j.at("mode"), "sample");
    const std::string csv = report.episodes_csv();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 501);
}

TEST(Rollout, RecordsVisits) {
    const TabularEnv env("bandit", fixtures::terminal_bandit({1.0, 0.0}), 1);
    const TablePolicy uniform(uniform_policy(2, 2), "uniform");
    const auto report = rollout(env, uniform, 100, 0, RolloutMode::kSample, {.record_visits = true});
    ASSERT_EQ(report.visits.size(), 1u);
    const auto& row = report.visits.at({0});
    EXPECT_EQ(row[0] + row[1], 100.0);
    EXPECT_EQ(row[0], report.undiscounted().mean * 100.0);
}

TEST(Rollout, Errors) {
    const TabularEnv env("bandit", fixtures::terminal_bandit({1.0, 0.0}), 1);
    const TablePolicy tiny(uniform_policy(1, 3), "tiny");
    EXPECT_THROW(rollout(env, tiny, 1, 0, RolloutMode::kSample), InvalidArgument);
    const TablePolicy uniform(uniform_policy(2, 2), "uniform");
    EXPECT_THROW(rollout(env, uniform, 0, 0, RolloutMode::kSample), InvalidArgument);
    const TabularEnv three("bandit3", fixtures::terminal_bandit({1.0, 0.0, 0.5}), 1);
    EXPECT_THROW(rollout(three, uniform, 1, 0, RolloutMode::kSample), InvalidArgument);
    EXPECT_THROW(parse_mode("best"), InvalidArgument);
}

TEST(Compare, Table) {
    const TabularEnv env("bandit", fixtures::terminal_bandit({1.0, 0.0}), 1);
    const TablePolicy uniform(uniform_policy(2, 2), "uniform");
    const auto r = rollout(env, uniform, 200, 5, RolloutMode::kSample);
    const auto same = compare({r, r});
    ASSERT_EQ(same.rows.size(), 2u);
    EXPECT_EQ(same.rows[1].diff_vs_first, 0.0);

    TabularPolicy always(2, 2, 0.0);
    always(0, 0) = always(1, 0) = 1.0;
    const auto best = rollout(env, TablePolicy(always, "always"), 200, 5, RolloutMode::kGreedy);
    const auto t = compare({r, best});
    EXPECT_NEAR(t.rows[1].diff_vs_first, 1.0 - r.undiscounted().mean, 1e-12);
    EXPECT_NE(t.to_csv().find("bandit,always,greedy,5,200,1,"), std::string::npos);
    EXPECT_NE(t.to_text().find("always"), std::string::npos);

    EXPECT_THROW(compare({}), InvalidArgument);
    auto other = r;
    other.env_id = "gridworld-stitch";
    EXPECT_THROW(compare({r, other}), InvalidArgument);
}

TEST(TotalVariation, Basics) {
    EXPECT_DOUBLE_EQ(total_variation(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(total_variation(std::vector<double>{0.5, 0.5}, std::vector<double>{0.75, 0.25}), 0.25);
    EXPECT_THROW(total_variation(std::vector<double>{1}, std::vector<double>{0.5, 0.5}), InvalidArgument);
}
