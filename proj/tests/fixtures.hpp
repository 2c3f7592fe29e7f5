#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "qsft/qsft.hpp"

namespace fixtures {

// State 0 acts once and moves to the terminal state 1 with reward r[a].
inline qsft::TabularMdp terminal_bandit(const std::vector<double>& rewards, double gamma = 0.95) {
    const std::size_t A = rewards.size();
    std::vector<double> P(2 * A * 2, 0.0), R(2 * A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
        P[(0 * A + a) * 2 + 1] = 1.0;
        P[(1 * A + a) * 2 + 1] = 1.0;
        R[a] = rewards[a];
    }
    return qsft::TabularMdp(2, A, P, R, {false, true}, {1.0, 0.0}, gamma);
}

// s0 -a0-> s1 (r 0), s0 -a1-> T (r 0.2), s1 -a0-> T (r 1), s1 -a1-> T (r 0).
inline qsft::TabularMdp two_state_chain(double gamma = 0.9) {
    constexpr std::size_t S = 3, A = 2;
    std::vector<double> P(S * A * S, 0.0), R(S * A, 0.0);
    auto set = [&](std::size_t s, std::size_t a, std::size_t n, double r) {
        P[(s * A + a) * S + n] = 1.0;
        R[s * A + a] = r;
    };
    set(0, 0, 1, 0.0);
    set(0, 1, 2, 0.2);
    set(1, 0, 2, 1.0);
    set(1, 1, 2, 0.0);
    set(2, 0, 2, 0.0);
    set(2, 1, 2, 0.0);
    return qsft::TabularMdp(S, A, P, R, {false, false, true}, {1.0, 0.0, 0.0}, gamma);
}

// Dataset of one-step bandit episodes with the given actions and rewards.
inline qsft::Dataset bandit_dataset(const std::vector<int>& actions, const std::vector<double>& rewards,
                                    std::size_t num_actions) {
    std::vector<qsft::Transition> ts;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        qsft::Transition t;
        t.state = {0};
        t.action = actions[i];
        t.reward = rewards[static_cast<std::size_t>(actions[i])];
        t.next_state = {1};
        t.done = true;
        t.traj_id = static_cast<int>(i);
        ts.push_back(t);
    }
    qsft::DatasetMeta meta;
    meta.env = "bandit";
    meta.num_actions = num_actions;
    meta.num_states = 2;
    return qsft::Dataset(ts, meta);
}

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("qsft_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixtures
