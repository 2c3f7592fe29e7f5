#pragma once

// Feature encoding for networks and queryable policies for rollouts.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qsft/envs.hpp"
#include "qsft/nn.hpp"
#include "qsft/tabular.hpp"

namespace qsft {

/// Environment features, optionally followed by a one-hot bucket of the
/// return-to-go for return-conditioned models.
class Featurizer {
 public:
  Featurizer(std::shared_ptr<const Env> env, std::size_t return_buckets = 0)
      : env_(std::move(env)), buckets_(return_buckets) {
    require(env_ != nullptr, "featurizer needs an environment");
  }

  const Env& env() const { return *env_; }
  std::shared_ptr<const Env> env_ptr() const { return env_; }
  std::size_t return_buckets() const { return buckets_; }
  std::size_t width() const { return env_->feature_width() + buckets_; }

  std::size_t bucket(double return_to_go) const {
    const double scaled = std::floor(std::max(0.0, return_to_go) * static_cast<double>(buckets_));
    return std::min(buckets_ - 1, static_cast<std::size_t>(scaled));
  }

  void encode(const Obs& obs, double return_to_go, std::span<double> out) const {
    const std::size_t base = env_->feature_width();
    env_->encode(obs, out.subspan(0, base));
    if (buckets_ == 0) return;
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(base), out.end(), 0.0);
    out[base + bucket(return_to_go)] = 1.0;
  }

  Matrix encode_rows(const std::vector<const Obs*>& obs, std::span<const double> return_to_go = {}) const {
    Matrix x(obs.size(), width());
    for (std::size_t i = 0; i < obs.size(); ++i)
      encode(*obs[i], return_to_go.empty() ? 0.0 : return_to_go[i], x.row(i));
    return x;
  }

 private:
  std::shared_ptr<const Env> env_;
  std::size_t buckets_;
};

struct EpisodeContext {
  double return_so_far = 0.0;
};

/// Action distribution at an observation. Implementations are immutable and
/// safe to query from several threads.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string id() const = 0;
  virtual std::vector<double> action_probs(const Obs& obs, const EpisodeContext& ctx) const = 0;
};

class TablePolicy : public Policy {
 public:
  TablePolicy(TabularPolicy table, std::string id) : table_(std::move(table)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  std::vector<double> action_probs(const Obs& obs, const EpisodeContext&) const override {
    if (obs.size() != 1 || obs[0] < 0 || static_cast<std::size_t>(obs[0]) >= table_.num_states())
      throw InvalidArgument(id_ + ": policy undefined at state " + (obs.empty() ? std::string("?") : std::to_string(obs[0])));
    const auto row = table_.row(static_cast<std::size_t>(obs[0]));
    return {row.begin(), row.end()};
  }

 private:
  TabularPolicy table_;
  std::string id_;
};

inline std::vector<double> net_probs(const DenseNet& net, const Featurizer& f, const Obs& obs, double rtg = 0.0) {
  std::vector<double> x(f.width());
  f.encode(obs, rtg, x);
  auto logits = net.logits_row(x);
  softmax_inplace(logits);
  return logits;
}

/// Softmax policy of a single network (behavior cloning and variants).
class NetPolicy : public Policy {
 public:
  NetPolicy(DenseNet net, Featurizer f, std::string id) : net_(std::move(net)), f_(std::move(f)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  std::vector<double> action_probs(const Obs& obs, const EpisodeContext&) const override {
    return net_probs(net_, f_, obs);
  }

 private:
  DenseNet net_;
  Featurizer f_;
  std::string id_;
};

/// pi_hat proportional to pi_phi exp(beta p_theta).
class QsftPolicy : public Policy {
 public:
  QsftPolicy(DenseNet behavior, DenseNet likelihood, Featurizer f, double beta, std::string id = "qsft")
      : behavior_(std::move(behavior)), likelihood_(std::move(likelihood)), f_(std::move(f)), beta_(beta),
        id_(std::move(id)) {
    require(beta >= 0.0, "beta must be nonnegative");
  }
  std::string id() const override { return id_; }
  std::vector<double> action_probs(const Obs& obs, const EpisodeContext&) const override {
    return extract_distribution(net_probs(likelihood_, f_, obs), net_probs(behavior_, f_, obs), beta_);
  }
  std::vector<double> likelihood(const Obs& obs) const { return net_probs(likelihood_, f_, obs); }
  std::vector<double> behavior(const Obs& obs) const { return net_probs(behavior_, f_, obs); }

 private:
  DenseNet behavior_, likelihood_;
  Featurizer f_;
  double beta_;
  std::string id_;
};

/// Dataset support: which actions were taken at each observation.
using SupportMap = std::map<Obs, std::vector<bool>>;

inline SupportMap dataset_support(const Dataset& dataset, std::size_t num_actions) {
  SupportMap support;
  for (const auto& t : dataset.transitions()) {
    auto& mask = support[t.state];
    if (mask.empty()) mask.assign(num_actions, false);
    mask.at(static_cast<std::size_t>(t.action)) = true;
  }
  return support;
}

/// Greedy over Q restricted to supported actions; unseen observations allow
/// every action.
inline int supported_argmax(std::span<const double> q, const std::vector<bool>* mask) {
  int best = -1;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (mask && !(*mask)[a]) continue;
    if (best < 0 || q[a] > q[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
  }
  return best < 0 ? argmax(q) : best;
}

class GreedyQPolicy : public Policy {
 public:
  GreedyQPolicy(DenseNet q, Featurizer f, SupportMap support, std::string id = "tdq")
      : q_(std::move(q)), f_(std::move(f)), support_(std::move(support)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  std::vector<double> q_values(const Obs& obs) const {
    std::vector<double> x(f_.width());
    f_.encode(obs, 0.0, x);
    return q_.logits_row(x);
  }
  std::vector<double> action_probs(const Obs& obs, const EpisodeContext&) const override {
    const auto q = q_values(obs);
    auto it = support_.find(obs);
    std::vector<double> p(q.size(), 0.0);
    p[static_cast<std::size_t>(supported_argmax(q, it == support_.end() ? nullptr : &it->second))] = 1.0;
    return p;
  }

 private:
  DenseNet q_;
  Featurizer f_;
  SupportMap support_;
  std::string id_;
};

/// Conditions on target_return minus the reward collected so far.
class ReturnConditionedPolicy : public Policy {
 public:
  ReturnConditionedPolicy(DenseNet net, Featurizer f, double target_return, std::string id = "rcsl")
      : net_(std::move(net)), f_(std::move(f)), target_(target_return), id_(std::move(id)) {
    require(f_.return_buckets() > 0, "return-conditioned policy needs return buckets");
  }
  std::string id() const override { return id_; }
  std::vector<double> action_probs(const Obs& obs, const EpisodeContext& ctx) const override {
    return net_probs(net_, f_, obs, target_ - ctx.return_so_far);
  }

 private:
  DenseNet net_;
  Featurizer f_;
  double target_;
  std::string id_;
};

}  // namespace qsft
