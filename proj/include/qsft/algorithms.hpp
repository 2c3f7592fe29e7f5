#pragma once

// Training loops: Q-SFT (behavior model, then likelihood model against
// Bellman-weighted targets) and the baselines that share its machinery.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/envs.hpp"
#include "qsft/nn.hpp"
#include "qsft/policy.hpp"
#include "qsft/tabular.hpp"

namespace qsft {

namespace detail {

inline double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw InvalidArgument("config key '" + key + "': '" + text + "' is not a number");
  return value;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw InvalidArgument("config key '" + key + "': '" + text + "' is not a nonnegative integer");
  return value;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

struct TrainConfig {
  double beta = 1.0;
  double gamma = 0.95;
  std::size_t batch_size = 128;
  double alpha = 0.005;
  std::size_t updates_per_iteration = 60;
  std::size_t iterations = 100;
  double lr_phi = 1e-4;
  double lr_theta = 1e-4;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{64, 64};
  double ratio_floor = kDefaultRatioFloor;
  double smoothing = 0.1;
  double rho = 0.1;
  std::size_t return_buckets = 8;

  std::size_t total_updates() const { return updates_per_iteration * iterations; }

  void set(const std::string& raw_key, const std::string& raw_value) {
    const std::string key = detail::trim(raw_key), value = detail::trim(raw_value);
    if (key == "beta") beta = detail::parse_double(key, value);
    else if (key == "gamma") gamma = detail::parse_double(key, value);
    else if (key == "batch_size") batch_size = detail::parse_unsigned(key, value);
    else if (key == "alpha") alpha = detail::parse_double(key, value);
    else if (key == "updates_per_iteration") updates_per_iteration = detail::parse_unsigned(key, value);
    else if (key == "iterations") iterations = detail::parse_unsigned(key, value);
    else if (key == "lr_phi") lr_phi = detail::parse_double(key, value);
    else if (key == "lr_theta") lr_theta = detail::parse_double(key, value);
    else if (key == "lr") lr_phi = lr_theta = detail::parse_double(key, value);
    else if (key == "seed") seed = detail::parse_unsigned(key, value);
    else if (key == "ratio_floor") ratio_floor = detail::parse_double(key, value);
    else if (key == "smoothing") smoothing = detail::parse_double(key, value);
    else if (key == "rho") rho = detail::parse_double(key, value);
    else if (key == "return_buckets") return_buckets = detail::parse_unsigned(key, value);
    else if (key == "hidden") {
      hidden.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!detail::trim(item).empty()) hidden.push_back(detail::parse_unsigned(key, detail::trim(item)));
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }

  /// Applies "key=value".
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + assignment + "'");
    set(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  void validate() const {
    require(beta >= 0.0, "beta must be nonnegative");
    require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
    require(batch_size > 0, "batch_size must be positive");
    require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0,1]");
    require(updates_per_iteration > 0 && iterations > 0, "update counts must be positive");
    require(lr_phi > 0.0 && lr_theta > 0.0, "learning rates must be positive");
    require(ratio_floor > 0.0, "ratio_floor must be positive");
    require(smoothing >= 0.0, "smoothing must be nonnegative");
    require(rho > 0.0 && rho <= 1.0, "rho must lie in (0,1]");
    require(return_buckets > 0, "return_buckets must be positive");
    for (std::size_t h : hidden) require(h > 0, "hidden layer sizes must be positive");
  }

  /// Plain key=value lines; '#' starts a comment.
  static TrainConfig from_file(const std::filesystem::path& path) { return from_file(path, TrainConfig{}); }

  static TrainConfig from_file(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      line = detail::trim(line.substr(0, line.find('#')));
      if (!line.empty()) base.set(line);
    }
    return base;
  }

  nlohmann::json to_json() const {
    return {{"beta", beta},           {"gamma", gamma},
            {"batch_size", batch_size}, {"alpha", alpha},
            {"updates_per_iteration", updates_per_iteration},
            {"iterations", iterations}, {"lr_phi", lr_phi},
            {"lr_theta", lr_theta},   {"seed", seed},
            {"hidden", hidden},       {"ratio_floor", ratio_floor},
            {"smoothing", smoothing}, {"rho", rho},
            {"return_buckets", return_buckets}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden") {
        c.hidden = value.get<std::vector<std::size_t>>();
      } else if (value.is_number_unsigned()) {
        c.set(key, std::to_string(value.get<std::uint64_t>()));
      } else if (value.is_number_integer()) {
        c.set(key, std::to_string(value.get<std::int64_t>()));
      } else {
        std::ostringstream ss;
        ss.precision(17);
        ss << value.get<double>();
        c.set(key, ss.str());
      }
    }
    return c;
  }
};

struct TrainedArtifacts {
  std::string algo;
  TrainConfig config;
  std::map<std::string, DenseNet> nets;
  std::map<std::string, std::vector<double>> curves;  // one loss per update
  SupportMap support;                                  // tdq only
};

// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> layer_sizes(std::size_t in, const TrainConfig& c, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
  sizes.push_back(out);
  return sizes;
}

inline std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = uniform_index(rng, n);
  return idx;
}

inline void check_dataset(const Dataset& dataset, const Featurizer& f) {
  require(!dataset.empty(), "training needs a nonempty dataset");
  const auto A = static_cast<std::size_t>(f.env().num_actions());
  for (const auto& t : dataset.transitions())
    require(t.action >= 0 && static_cast<std::size_t>(t.action) < A, "dataset action out of range for environment");
}

inline void check_finite(double loss, const std::string& what, std::size_t step) {
  if (!std::isfinite(loss)) throw DivergenceError(what + ": non-finite loss", step);
}

// Runs backward and rewraps gradient failures with the update index.
inline double train_step(DenseNet& net, Adam& opt, LossKind kind, const LossBatch& batch, const std::string& what,
                         std::size_t step) {
  std::vector<double> grad;
  double loss = 0.0;
  try {
    loss = evaluate_loss(net, kind, batch, &grad);
  } catch (const NonFiniteGradient& e) {
    throw DivergenceError(what + ": non-finite gradient in layer " + std::to_string(e.layer()), step);
  }
  check_finite(loss, what, step);
  opt.step(net.params(), grad);
  return loss;
}

// Undiscounted reward still to come at each transition, inclusive.
inline std::vector<double> returns_to_go(const Dataset& dataset) {
  std::vector<double> rtg(dataset.size(), 0.0);
  for (const auto& range : dataset.trajectories()) {
    double acc = 0.0;
    for (std::size_t i = range.end; i-- > range.begin;) rtg[i] = (acc += dataset.transitions()[i].reward);
  }
  return rtg;
}

// Cross-entropy fitting on (features, action) pairs; rtg non-empty adds the
// return-conditioning features.
inline DenseNet fit_supervised(const Dataset& dataset, const Featurizer& f, const TrainConfig& c,
                               std::uint64_t stream, std::span<const double> rtg, std::vector<double>& curve,
                               const std::string& what) {
  check_dataset(dataset, f);
  DenseNet net(layer_sizes(f.width(), c, static_cast<std::size_t>(f.env().num_actions())), c.seed);
  Adam opt(net.num_params(), c.lr_phi);
  Rng rng = stream_rng(c.seed, stream);
  const auto& ts = dataset.transitions();
  curve.clear();
  curve.reserve(c.total_updates());
  std::vector<const Obs*> obs(c.batch_size);
  std::vector<double> cond(rtg.empty() ? 0 : c.batch_size);
  LossBatch batch;
  batch.actions.resize(c.batch_size);
  for (std::size_t step = 0; step < c.total_updates(); ++step) {
    const auto idx = sample_indices(rng, ts.size(), c.batch_size);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      obs[i] = &ts[idx[i]].state;
      batch.actions[i] = ts[idx[i]].action;
      if (!rtg.empty()) cond[i] = rtg[idx[i]];
    }
    batch.features = f.encode_rows(obs, cond);
    curve.push_back(train_step(net, opt, LossKind::kCrossEntropy, batch, what, step));
  }
  return net;
}

inline void require_bounded_returns(const Dataset& dataset, double gamma) {
  for (std::size_t i = 0; i < dataset.num_trajectories(); ++i)
    require(dataset.discounted_return(i, gamma) <= 1.0 + 1e-9,
            "trajectory " + std::to_string(i) + " has discounted return above 1; rescale rewards first");
}

}  // namespace detail

inline constexpr std::uint64_t kBehaviorStream = 1;
inline constexpr std::uint64_t kLikelihoodStream = 2;
inline constexpr std::uint64_t kTdStream = 3;

inline TrainedArtifacts make_artifacts(std::string algo, const TrainConfig& config) {
  TrainedArtifacts out;
  out.algo = std::move(algo);
  out.config = config;
  return out;
}

inline TrainedArtifacts train_bc(const Dataset& dataset, const Featurizer& f, const TrainConfig& config) {
  config.validate();
  TrainedArtifacts out = make_artifacts("bc", config);
  out.nets.emplace("behavior", detail::fit_supervised(dataset, f, config, kBehaviorStream, {},
                                                      out.curves["behavior"], "bc"));
  return out;
}

/// Behavior cloning on the top ceil(rho * n) trajectories by undiscounted
/// return (ties to the lower traj_id), kept in their original order.
inline Dataset filter_top_trajectories(const Dataset& dataset, double rho) {
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0,1]");
  const std::size_t n = dataset.num_trajectories();
  const auto keep = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  require(keep > 0, "filtered set is empty");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return dataset.undiscounted_return(x) > dataset.undiscounted_return(y);
  });
  std::vector<bool> chosen(n, false);
  for (std::size_t i = 0; i < keep; ++i) chosen[order[i]] = true;
  std::vector<Transition> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (chosen[i])
      for (const auto& t : dataset.trajectory(i)) kept.push_back(t);
  return Dataset(std::move(kept), dataset.meta());
}

inline TrainedArtifacts filtered_bc(const Dataset& dataset, double rho, const Featurizer& f, TrainConfig config) {
  config.rho = rho;
  config.validate();
  TrainedArtifacts out = train_bc(filter_top_trajectories(dataset, rho), f, config);
  out.algo = "filtered-bc";
  return out;
}

/// The featurizer must carry config.return_buckets return buckets.
inline TrainedArtifacts train_rcsl(const Dataset& dataset, const Featurizer& f, const TrainConfig& config) {
  config.validate();
  require(f.return_buckets() == config.return_buckets, "rcsl featurizer bucket count differs from config");
  TrainedArtifacts out = make_artifacts("rcsl", config);
  const auto rtg = detail::returns_to_go(dataset);
  out.nets.emplace("rcsl", detail::fit_supervised(dataset, f, config, kBehaviorStream, rtg, out.curves["rcsl"], "rcsl"));
  return out;
}

inline TrainedArtifacts train_qsft(const Dataset& dataset, const Featurizer& f, const TrainConfig& config) {
  config.validate();
  detail::check_dataset(dataset, f);
  detail::require_bounded_returns(dataset, config.gamma);
  const auto A = static_cast<std::size_t>(f.env().num_actions());
  require(A >= 2, "q-sft needs at least two actions");
  TrainedArtifacts out = make_artifacts("qsft", config);

  // Phase 1: behavior model.
  const DenseNet phi = detail::fit_supervised(dataset, f, config, kBehaviorStream, {}, out.curves["behavior"], "qsft behavior");

  // Phase 2: likelihood model from the same initialization.
  const auto& ts = dataset.transitions();
  std::vector<const Obs*> all_next;
  for (const auto& t : ts) all_next.push_back(&t.next_state);
  const Matrix pi_next = softmax(phi.forward(f.encode_rows(all_next)));

  DenseNet theta(detail::layer_sizes(f.width(), config, A), config.seed);
  TargetCopy target(theta, config.alpha);
  Adam opt(theta.num_params(), config.lr_theta);
  Rng rng = stream_rng(config.seed, kLikelihoodStream);
  auto& curve = out.curves["likelihood"];
  curve.reserve(config.total_updates());
  std::vector<const Obs*> obs(config.batch_size), next;
  LossBatch batch;
  batch.actions.resize(config.batch_size);
  batch.targets.resize(config.batch_size);
  for (std::size_t step = 0; step < config.total_updates(); ++step) {
    const auto idx = detail::sample_indices(rng, ts.size(), config.batch_size);
    next.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& t = ts[idx[i]];
      obs[i] = &t.state;
      batch.actions[i] = t.action;
      if (!t.done) next.push_back(&t.next_state);
    }
    const Matrix p_bar = next.empty() ? Matrix() : softmax(target.net().forward(f.encode_rows(next)));
    std::size_t k = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& t = ts[idx[i]];
      batch.targets[i] = t.done ? clamp01(t.reward)
                                : backup_target(t.reward, false, config.gamma, p_bar.row(k++), pi_next.row(idx[i]),
                                                config.ratio_floor);
    }
    batch.features = f.encode_rows(obs);
    curve.push_back(detail::train_step(theta, opt, LossKind::kWeightedCrossEntropy, batch, "qsft likelihood", step));
    target.update(theta);
  }
  out.nets.emplace("behavior", phi);
  out.nets.emplace("likelihood", std::move(theta));
  out.nets.emplace("likelihood_target", target.net());
  return out;
}

/// Q-learning on the TD loss with a Polyak target; the bootstrap max and the
/// greedy policy only consider actions seen at that observation.
inline TrainedArtifacts train_td_q(const Dataset& dataset, const Featurizer& f, const TrainConfig& config) {
  config.validate();
  detail::check_dataset(dataset, f);
  const auto A = static_cast<std::size_t>(f.env().num_actions());
  TrainedArtifacts out = make_artifacts("tdq", config);
  out.support = dataset_support(dataset, A);
  const auto& ts = dataset.transitions();
  std::vector<const std::vector<bool>*> next_mask(ts.size(), nullptr);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    auto it = out.support.find(ts[i].next_state);
    if (it != out.support.end()) next_mask[i] = &it->second;
  }

  DenseNet q(detail::layer_sizes(f.width(), config, A), config.seed);
  TargetCopy target(q, config.alpha);
  Adam opt(q.num_params(), config.lr_theta);
  Rng rng = stream_rng(config.seed, kTdStream);
  auto& curve = out.curves["q"];
  curve.reserve(config.total_updates());
  std::vector<const Obs*> obs(config.batch_size), next;
  LossBatch batch;
  batch.actions.resize(config.batch_size);
  batch.targets.resize(config.batch_size);
  for (std::size_t step = 0; step < config.total_updates(); ++step) {
    const auto idx = detail::sample_indices(rng, ts.size(), config.batch_size);
    next.clear();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& t = ts[idx[i]];
      obs[i] = &t.state;
      batch.actions[i] = t.action;
      if (!t.done) next.push_back(&t.next_state);
    }
    const Matrix q_bar = next.empty() ? Matrix() : target.net().forward(f.encode_rows(next));
    std::size_t k = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& t = ts[idx[i]];
      if (t.done) {
        batch.targets[i] = t.reward;
        continue;
      }
      const auto row = q_bar.row(k++);
      batch.targets[i] = t.reward + config.gamma * row[static_cast<std::size_t>(supported_argmax(row, next_mask[idx[i]]))];
    }
    batch.features = f.encode_rows(obs);
    curve.push_back(detail::train_step(q, opt, LossKind::kTemporalDifference, batch, "tdq", step));
    target.update(q);
  }
  out.nets.emplace("q", std::move(q));
  out.nets.emplace("q_target", target.net());
  return out;
}

inline TrainedArtifacts train(const std::string& algo, const Dataset& dataset, const Featurizer& f,
                              const TrainConfig& config) {
  if (algo == "qsft") return train_qsft(dataset, f, config);
  if (algo == "bc") return train_bc(dataset, f, config);
  if (algo == "tdq") return train_td_q(dataset, f, config);
  if (algo == "filtered-bc") return filtered_bc(dataset, config.rho, f, config);
  if (algo == "rcsl") return train_rcsl(dataset, f, config);
  throw InvalidArgument("unknown algorithm '" + algo + "'");
}

inline std::size_t featurizer_buckets(const std::string& algo, const TrainConfig& config) {
  return algo == "rcsl" ? config.return_buckets : 0;
}

/// Deployable policy for trained artifacts. beta applies to qsft;
/// target_return to rcsl.
inline std::unique_ptr<Policy> make_policy(const TrainedArtifacts& art, std::shared_ptr<const Env> env, double beta,
                                           double target_return = 1.0) {
  Featurizer f(std::move(env), featurizer_buckets(art.algo, art.config));
  auto net = [&](const char* name) {
    auto it = art.nets.find(name);
    if (it == art.nets.end()) throw InvalidArgument(art.algo + " artifacts lack network '" + name + "'");
    if (it->second.input_width() != f.width())
      throw InvalidArgument("network '" + std::string(name) + "' expects " + std::to_string(it->second.input_width()) +
                            " features, environment provides " + std::to_string(f.width()));
    return it->second;
  };
  if (art.algo == "qsft") return std::make_unique<QsftPolicy>(net("behavior"), net("likelihood"), f, beta);
  if (art.algo == "bc" || art.algo == "filtered-bc") return std::make_unique<NetPolicy>(net("behavior"), f, art.algo);
  if (art.algo == "tdq") return std::make_unique<GreedyQPolicy>(net("q"), f, art.support);
  if (art.algo == "rcsl") return std::make_unique<ReturnConditionedPolicy>(net("rcsl"), f, target_return);
  throw InvalidArgument("unknown algorithm '" + art.algo + "'");
}

/// Loss-trend guard: mean loss over the last iteration block is at most the
/// mean over the block `window` iterations earlier, plus `slack`.
inline bool loss_trend_ok(const std::vector<double>& curve, std::size_t updates_per_iteration, std::size_t window = 10,
                          double slack = 0.01) {
  const std::size_t blocks = curve.size() / updates_per_iteration;
  if (blocks <= window) return true;
  auto block_mean = [&](std::size_t b) {
    double total = 0.0;
    for (std::size_t i = b * updates_per_iteration; i < (b + 1) * updates_per_iteration; ++i) total += curve[i];
    return total / static_cast<double>(updates_per_iteration);
  };
  return block_mean(blocks - 1) <= block_mean(blocks - 1 - window) + slack;
}

// ---------------------------------------------------------------------------
// Checkpoint round trip.

inline nlohmann::json env_spec_to_json(const EnvSpec& spec) {
  return {{"name", spec.name}, {"seed", spec.seed}, {"gamma", spec.gamma}, {"params", spec.params}};
}

inline EnvSpec env_spec_from_json(const nlohmann::json& j) {
  return EnvSpec{.name = j.at("name").get<std::string>(),
                 .seed = j.at("seed").get<std::uint64_t>(),
                 .gamma = j.at("gamma").get<double>(),
                 .params = j.at("params").get<std::map<std::string, double>>()};
}

inline Checkpoint to_checkpoint(const TrainedArtifacts& art, const EnvSpec& env) {
  Checkpoint ckpt;
  ckpt.nets = art.nets;
  ckpt.info["algo"] = art.algo;
  ckpt.info["config"] = art.config.to_json();
  ckpt.info["env"] = env_spec_to_json(env);
  std::size_t updates = 0;
  for (const auto& [name, curve] : art.curves) updates = std::max(updates, curve.size());
  ckpt.info["steps"] = updates;
  auto& support = ckpt.info["support"] = nlohmann::json::array();
  for (const auto& [obs, mask] : art.support) {
    std::vector<int> bits(mask.begin(), mask.end());
    support.push_back({{"s", obs}, {"m", bits}});
  }
  return ckpt;
}

inline std::pair<TrainedArtifacts, EnvSpec> from_checkpoint(const Checkpoint& ckpt) {
  TrainedArtifacts art;
  art.algo = ckpt.info.at("algo").get<std::string>();
  art.config = TrainConfig::from_json(ckpt.info.at("config"));
  art.nets = ckpt.nets;
  for (const auto& entry : ckpt.info.value("support", nlohmann::json::array())) {
    const auto bits = entry.at("m").get<std::vector<int>>();
    art.support.emplace(entry.at("s").get<Obs>(), std::vector<bool>(bits.begin(), bits.end()));
  }
  return {std::move(art), env_spec_from_json(ckpt.info.at("env"))};
}

// ---------------------------------------------------------------------------
// Count-based Q-SFT for exact tests.

struct TabularQsftResult {
  LikelihoodTable p;
  TabularPolicy behavior;  // smoothed counts, used for ratios and extraction
  TabularPolicy policy;    // extracted with config.beta
  std::vector<std::size_t> covered_states;
  std::vector<std::size_t> uncovered_states;
  std::vector<std::pair<std::size_t, std::size_t>> uncovered_pairs;  // at covered states
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Replays the recurrence with dataset estimates: action frequencies weight
/// the update, mean rewards and empirical next-state frequencies give the
/// backup, the smoothed behavior estimate is the ratio denominator.
/// Uncovered states keep their initial row and are reported.
inline TabularQsftResult tabular_qsft(const Dataset& dataset, std::size_t num_states, std::size_t num_actions,
                                      const TrainConfig& config, double tol = 1e-12, std::size_t max_iters = 200000,
                                      FixedPointOptions options = {}) {
  config.validate();
  require(num_actions >= 2, "tabular_qsft needs at least two actions");
  require(!dataset.empty(), "tabular_qsft needs a nonempty dataset");
  options.ratio_floor = config.ratio_floor;
  const std::size_t S = num_states, A = num_actions;
  const double gamma = config.gamma;

  TabularQsftResult out;
  out.behavior = empirical_behavior_policy(dataset, S, A, config.smoothing);

  QTable count(S, A, 0.0), reward_sum(S, A, 0.0);
  // Successor counts per (s,a); done transitions bootstrap nothing.
  std::vector<std::map<std::size_t, double>> successors(S * A);
  for (const auto& t : dataset.transitions()) {
    const auto s = static_cast<std::size_t>(t.state_id()), a = static_cast<std::size_t>(t.action);
    require(s < S && a < A, "dataset state or action out of range");
    count(s, a) += 1.0;
    reward_sum(s, a) += t.reward;
    if (!t.done) {
      const auto n = static_cast<std::size_t>(t.next_state_id());
      require(n < S, "next state id out of range");
      successors[s * A + a][n] += 1.0;
    }
  }

  RecurrenceModel m;
  m.num_states = S;
  m.num_actions = A;
  m.gamma = gamma;
  m.ratio_floor = config.ratio_floor;
  m.active.assign(S, false);
  m.weights = TabularPolicy(S, A, 0.0);
  m.denom = out.behavior;
  m.reward = QTable(S, A, 0.0);
  m.successors.resize(S * A);
  m.initial = LikelihoodTable(S, A, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) m.initial(s, a) = out.behavior(s, a);
    double n = 0.0;
    for (double c : count.row(s)) n += c;
    if (n == 0.0) {
      out.uncovered_states.push_back(s);
      continue;
    }
    m.active[s] = true;
    out.covered_states.push_back(s);
    for (std::size_t a = 0; a < A; ++a) m.weights(s, a) = count(s, a) / n;
  }
  for (std::size_t s = 0; s < S; ++s) {
    if (!m.active[s]) continue;
    for (std::size_t a = 0; a < A; ++a) {
      const double n = count(s, a);
      if (n == 0.0) {
        out.uncovered_pairs.emplace_back(s, a);
        continue;
      }
      m.reward(s, a) = reward_sum(s, a) / n;
      // An uncovered successor has no likelihood estimate and contributes 0.
      for (const auto& [next, c] : successors[s * A + a])
        if (m.active[next]) m.successors[s * A + a].emplace_back(next, c / n);
    }
  }
  FixedPointResult fp = solve_recurrence(m, tol, max_iters, options, "tabular_qsft");
  out.p = std::move(fp.p);
  out.iterations = fp.iterations;
  out.residual = fp.residual;
  out.policy = extract_policy(out.p, out.behavior, config.beta);
  return out;
}

}  // namespace qsft
