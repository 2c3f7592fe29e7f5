// qsft: generate datasets, train, verify value bounds, evaluate and sweep.
//
// Exit codes: 0 ok, 2 invalid argument, 3 I/O, 4 verification failure,
// 5 training divergence, 1 anything else.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qsft/manifest.hpp"
#include "qsft/qsft.hpp"

namespace fs = std::filesystem;
using namespace qsft;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kInvalid = 2, kIo = 3, kVerify = 4, kDiverged = 5 };

class VerificationFailure : public Error {
 public:
  using Error::Error;
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kInvalid;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const VerificationFailure*>(&e)) return kVerify;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kVerify;
  if (dynamic_cast<const DivergenceError*>(&e)) return kDiverged;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kInvalid;
  return kOther;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

// Runs `body` holding the output lock; the manifest is written whether the
// body succeeds or throws.
int run_with_manifest(const std::vector<std::string>& argv, std::uint64_t seed, const fs::path& manifest_path,
                      const fs::path& lock_path, const std::function<void(RunManifest&)>& body) {
  std::optional<DirectoryLock> lock;
  try {
    ensure_dir(lock_path.parent_path());
    lock.emplace(lock_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  RunManifest manifest(argv, seed);
  int code = kOk;
  std::string message;
  try {
    body(manifest);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    message = e.what();
    std::cerr << "error: " << message << "\n";
  }
  try {
    manifest.write(manifest_path, code, message);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (code == kOk) code = kIo;
  }
  return code;
}

struct EnvFlags {
  std::string name;
  double gamma = 0.95;
  std::vector<int> grid{5, 5};
  int word_len = 3;
  int alphabet = 5;
  int guesses = 4;
  int states = 10;
  int actions = 3;
  int branching = 3;
  int horizon = 50;

  void add_to(CLI::App* cmd, bool required) {
    auto* opt = cmd->add_option("--env", name, "gridworld-stitch | mini-wordle | random-mdp");
    if (required) opt->required();
    cmd->add_option("--gamma", gamma, "discount")->capture_default_str();
    cmd->add_option("--grid", grid, "gridworld width and height")->expected(2);
    cmd->add_option("--word-len", word_len, "mini-wordle word length")->capture_default_str();
    cmd->add_option("--alphabet", alphabet, "mini-wordle alphabet size")->capture_default_str();
    cmd->add_option("--guesses", guesses, "mini-wordle guesses per game")->capture_default_str();
    cmd->add_option("--states", states, "random-mdp state count")->capture_default_str();
    cmd->add_option("--actions", actions, "random-mdp action count")->capture_default_str();
    cmd->add_option("--branching", branching, "random-mdp successors per (s,a)")->capture_default_str();
    cmd->add_option("--horizon", horizon, "random-mdp episode length")->capture_default_str();
  }

  EnvSpec spec(std::uint64_t seed) const {
    EnvSpec s{.name = name, .seed = seed, .gamma = gamma, .params = {}};
    if (name == "gridworld-stitch") {
      s.params = {{"width", grid.at(0)}, {"height", grid.at(1)}};
    } else if (name == "mini-wordle") {
      s.params = {{"word_len", word_len}, {"alphabet", alphabet}, {"guesses", guesses}};
    } else if (name == "random-mdp") {
      s.params = {{"states", states}, {"actions", actions}, {"branching", branching},
                  {"mdp_seed", static_cast<double>(seed)}, {"horizon", horizon}};
    } else {
      throw InvalidArgument("unknown environment '" + name + "'");
    }
    return s;
  }
};

// Dataset for an env spec: the two-family stitch generator for the gridworld,
// epsilon-mixture rollouts of the scripted policy otherwise.
Dataset generate(const EnvSpec& spec, std::size_t episodes, std::uint64_t seed, double epsilon,
                 double corridor_noise) {
  if (spec.name == "gridworld-stitch") {
    const auto g = build_gridworld_stitch(static_cast<int>(spec.param("width", 5)),
                                          static_cast<int>(spec.param("height", 5)), spec.gamma);
    return gen_stitch_dataset(g, episodes, seed, {.corridor_noise = corridor_noise});
  }
  const auto env = make_env(spec);
  return rollout_dataset(*env, GeneratorPolicy{.epsilon = epsilon, .seed = seed}, episodes, seed);
}

// ---------------------------------------------------------------------------

struct GenDataFlags {
  EnvFlags env;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  std::string out;
  double epsilon = 0.5;
  double corridor_noise = 0.5;
};

int cmd_gen_data(const GenDataFlags& f, const std::vector<std::string>& argv) {
  EnvSpec spec;
  try {
    if (f.episodes == 0) throw InvalidArgument("--episodes must be positive");
    if (f.epsilon < 0.0 || f.epsilon > 1.0) throw InvalidArgument("--epsilon must lie in [0,1]");
    spec = f.env.spec(f.seed);
    make_env(spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  fs::path dataset_path, manifest_path, lock_path;
  if (ends_with(f.out, ".jsonl")) {
    dataset_path = f.out;
    manifest_path = fs::path(f.out).replace_extension(".manifest.json");
    lock_path = fs::path(f.out + ".lock");
  } else {
    dataset_path = fs::path(f.out) / "dataset.jsonl";
    manifest_path = fs::path(f.out) / "manifest.json";
    lock_path = fs::path(f.out) / ".lock";
  }
  return run_with_manifest(argv, f.seed, manifest_path, lock_path, [&](RunManifest& m) {
    m.set_config({{"env", env_spec_to_json(spec)},
                  {"episodes", f.episodes},
                  {"epsilon", f.epsilon},
                  {"corridor_noise", f.corridor_noise}});
    const Dataset d = generate(spec, f.episodes, f.seed, f.epsilon, f.corridor_noise);
    write_dataset(d, dataset_path);
    m.add_output(dataset_path);
    m.add_output(meta_path_for(dataset_path));
    std::cout << "wrote " << d.num_trajectories() << " trajectories (" << d.size() << " transitions) to "
              << dataset_path.string() << "\n";
  });
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string algo;
  std::string data;
  std::string config;
  std::string out;
  std::vector<std::string> sets;
};

TrainConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  TrainConfig c = path.empty() ? TrainConfig{} : TrainConfig::from_file(path);
  for (const auto& s : sets) c.set(s);
  c.validate();
  return c;
}

std::string losses_csv(const TrainedArtifacts& art) {
  std::ostringstream out;
  out.precision(10);
  out << "step";
  std::size_t rows = 0;
  for (const auto& [name, curve] : art.curves) {
    out << ',' << name;
    rows = std::max(rows, curve.size());
  }
  out << '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    out << i;
    for (const auto& [name, curve] : art.curves) {
      out << ',';
      if (i < curve.size()) out << curve[i];
    }
    out << '\n';
  }
  return out.str();
}

std::string config_text(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  const nlohmann::json j = c.to_json();
  for (const auto& [key, value] : j.items()) {
    out << key << '=';
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) out << (i ? "," : "") << value[i].get<std::size_t>();
    } else if (value.is_number_float()) {
      out << value.get<double>();
    } else {
      out << value.dump();
    }
    out << '\n';
  }
  return out.str();
}

int cmd_train(const TrainFlags& f, const std::vector<std::string>& argv) {
  TrainConfig config;
  try {
    static const std::vector<std::string> algos{"qsft", "bc", "tdq", "filtered-bc", "rcsl"};
    if (std::find(algos.begin(), algos.end(), f.algo) == algos.end())
      throw InvalidArgument("unknown algorithm '" + f.algo + "'");
    config = load_config(f.config, f.sets);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  const fs::path out = f.out;
  return run_with_manifest(argv, config.seed, out / "manifest.json", out / ".lock", [&](RunManifest& m) {
    m.set_config({{"algo", f.algo}, {"train", config.to_json()}});
    if (!f.config.empty()) m.add_input(f.config);
    const Dataset raw = read_dataset(f.data);
    m.add_input(f.data);
    m.add_input(meta_path_for(f.data));
    if (raw.meta().gamma != config.gamma) {
      const std::string w = "config gamma " + std::to_string(config.gamma) + " differs from dataset gamma " +
                            std::to_string(raw.meta().gamma) + "; using the config value";
      std::cerr << "warning: " << w << "\n";
      m.warn(w);
    }
    auto [dataset, factor] = scale_rewards(raw, config.gamma);
    m.note("reward_scale_factor", factor);
    EnvSpec spec = env_spec_from_meta(dataset.meta());
    spec.gamma = config.gamma;
    std::shared_ptr<const Env> env = make_env(spec);
    const Featurizer featurizer(env, featurizer_buckets(f.algo, config));
    const TrainedArtifacts art = train(f.algo, dataset, featurizer, config);
    if (f.algo == "qsft" && !loss_trend_ok(art.curves.at("likelihood"), config.updates_per_iteration)) {
      const std::string w = "likelihood loss rose over the last 10 iterations";
      std::cerr << "warning: " << w << "\n";
      m.warn(w);
    }
    save_checkpoint(out / "ckpt.bin", to_checkpoint(art, spec));
    write_text(out / "losses.csv", losses_csv(art));
    write_text(out / "config.txt", config_text(config));
    for (const char* name : {"ckpt.bin", "losses.csv", "config.txt"}) m.add_output(out / name);
    std::cout << f.algo << ": " << config.total_updates() << " updates, checkpoint " << (out / "ckpt.bin").string()
              << "\n";
  });
}

// ---------------------------------------------------------------------------

struct VerifyFlags {
  std::size_t seeds = 100;
  std::uint64_t seed = 0;
  std::size_t max_states = 20;
  std::string actions = "3..5";
  std::string gammas = "0.9,0.95";
  double tol = 1e-6;
  std::size_t branching = 3;
  std::string out = "verify";
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoul(text);
      return {v, v};
    }
    return {std::stoul(text.substr(0, dots)), std::stoul(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw InvalidArgument("expected LO..HI, got '" + text + "'");
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  return out;
}

int cmd_verify(const VerifyFlags& f, const std::vector<std::string>& argv) {
  SuiteOptions options;
  try {
    if (!(f.tol >= 0.0)) throw InvalidArgument("--tol must be nonnegative");
    const auto [lo, hi] = parse_range(f.actions);
    options.num_mdps = f.seeds;
    options.seed = f.seed;
    options.max_states = f.max_states;
    options.min_actions = lo;
    options.max_actions = hi;
    options.gammas = parse_list(f.gammas);
    options.tol = f.tol;
    options.branching = f.branching;
    options.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  fs::path report_path, text_path, manifest_path, lock_path;
  if (ends_with(f.out, ".json")) {
    report_path = f.out;
    text_path = fs::path(f.out).replace_extension(".txt");
    manifest_path = fs::path(f.out).replace_extension(".manifest.json");
    lock_path = fs::path(f.out + ".lock");
  } else {
    report_path = fs::path(f.out) / "report.json";
    text_path = fs::path(f.out) / "report.txt";
    manifest_path = fs::path(f.out) / "manifest.json";
    lock_path = fs::path(f.out) / ".lock";
  }
  return run_with_manifest(argv, f.seed, manifest_path, lock_path, [&](RunManifest& m) {
    m.set_config({{"seeds", f.seeds}, {"seed", f.seed}, {"max_states", f.max_states}, {"actions", f.actions},
                  {"gamma", options.gammas}, {"tol", f.tol}, {"branching", f.branching}});
    const SuiteReport report = run_bound_suite(options);
    write_text(report_path, report.to_json().dump(2) + "\n");
    write_text(text_path, report.to_table());
    m.add_output(report_path);
    m.add_output(text_path);
    for (const auto& w : report.warnings()) {
      std::cerr << "warning: " << w << "\n";
      m.warn(w);
    }
    std::cout << "mdps=" << report.cases.size() << " qualifying=" << report.qualifying()
              << " upper_violations=" << report.upper_violations() << " lower_violations=" << report.lower_violations()
              << " max_row_sum_error=" << report.max_row_sum_error() << "\n";
    if (!report.passed()) {
      std::ostringstream msg;
      msg << "bound violations in " << report.violating_mdps() << " of " << report.cases.size() << " MDPs";
      for (const auto& c : report.cases)
        for (const auto& e : c.report.entries)
          if (e.qualifies && !(e.upper_ok && e.lower_ok)) {
            msg << "; first at seed " << c.mdp_seed << " s=" << e.state << " a=" << e.action;
            throw VerificationFailure(msg.str());
          }
      msg << "; row sums off by " << report.max_row_sum_error();
      throw VerificationFailure(msg.str());
    }
  });
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  std::string checkpoint;
  EnvFlags env;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
  std::string mode = "sample";
  std::optional<double> beta;
  double target_return = 1.0;
  std::string out = "eval";
};

int cmd_eval(const EvalFlags& f, const std::vector<std::string>& argv) {
  RolloutMode mode;
  try {
    mode = parse_mode(f.mode);
    if (f.episodes == 0) throw InvalidArgument("--episodes must be positive");
    if (f.beta && *f.beta < 0.0) throw InvalidArgument("--beta must be nonnegative");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  const fs::path out = f.out;
  return run_with_manifest(argv, f.seed, out / "manifest.json", out / ".lock", [&](RunManifest& m) {
    if (!fs::exists(f.checkpoint)) throw IoError("checkpoint " + f.checkpoint + " not found");
    m.add_input(f.checkpoint);
    auto [art, spec] = from_checkpoint(load_checkpoint(f.checkpoint));
    if (!f.env.name.empty()) {
      const double gamma = spec.gamma;
      spec = f.env.spec(spec.seed);
      spec.gamma = gamma;
    }
    const double beta = f.beta.value_or(art.config.beta);
    m.set_config({{"algo", art.algo}, {"env", env_spec_to_json(spec)}, {"episodes", f.episodes},
                  {"mode", f.mode}, {"beta", beta}, {"target_return", f.target_return}});
    std::shared_ptr<const Env> env = make_env(spec);
    const auto policy = make_policy(art, env, beta, f.target_return);
    const EvalReport report = rollout(*env, *policy, f.episodes, f.seed, mode);
    write_text(out / "episodes.csv", report.episodes_csv());
    auto summary = report.summary_json();
    summary["beta"] = beta;
    write_text(out / "summary.json", summary.dump(2) + "\n");
    m.add_output(out / "episodes.csv");
    m.add_output(out / "summary.json");
    const auto u = report.undiscounted();
    std::cout << art.algo << " " << f.mode << ": mean return " << u.mean << " +- " << u.stderr_ << ", success "
              << report.success_rate() << "\n";
  });
}

// ---------------------------------------------------------------------------

struct SweepFlags {
  std::string config;
  std::string out = "sweep";
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
};

// Sweep file keys: env, algos, seeds, episodes, eval_episodes, mode, beta,
// epsilon, gamma, width, height, word_len, alphabet, guesses, states,
// actions, branching, horizon, target_return; anything prefixed "train."
// goes to the training config.
struct SweepPlan {
  EnvFlags env;
  std::vector<std::string> algos{"qsft", "bc", "rcsl", "filtered-bc", "tdq"};
  std::size_t seeds = 3;
  std::size_t episodes = 1000;
  std::size_t eval_episodes = 100;
  std::string mode = "greedy";
  double epsilon = 0.5;
  double target_return = 1.0;
  TrainConfig train;

  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InvalidArgument("expected key=value, got '" + assignment + "'");
    const std::string key = detail::trim(assignment.substr(0, eq)), value = detail::trim(assignment.substr(eq + 1));
    auto num = [&] { return detail::parse_double(key, value); };
    auto count = [&] { return static_cast<std::size_t>(detail::parse_unsigned(key, value)); };
    if (key.rfind("train.", 0) == 0) train.set(key.substr(6), value);
    else if (key == "env") env.name = value;
    else if (key == "algos") {
      algos.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!detail::trim(item).empty()) algos.push_back(detail::trim(item));
    } else if (key == "seeds") seeds = count();
    else if (key == "episodes") episodes = count();
    else if (key == "eval_episodes") eval_episodes = count();
    else if (key == "mode") mode = value;
    else if (key == "beta") train.beta = num();
    else if (key == "epsilon") epsilon = num();
    else if (key == "target_return") target_return = num();
    else if (key == "gamma") env.gamma = train.gamma = num();
    else if (key == "width") env.grid.at(0) = static_cast<int>(count());
    else if (key == "height") env.grid.at(1) = static_cast<int>(count());
    else if (key == "word_len") env.word_len = static_cast<int>(count());
    else if (key == "alphabet") env.alphabet = static_cast<int>(count());
    else if (key == "guesses") env.guesses = static_cast<int>(count());
    else if (key == "states") env.states = static_cast<int>(count());
    else if (key == "actions") env.actions = static_cast<int>(count());
    else if (key == "branching") env.branching = static_cast<int>(count());
    else if (key == "horizon") env.horizon = static_cast<int>(count());
    else throw InvalidArgument("unknown sweep key '" + key + "'");
  }
};

int cmd_sweep(const SweepFlags& f, const std::vector<std::string>& argv) {
  SweepPlan plan;
  RolloutMode mode;
  try {
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw IoError("cannot open sweep config " + f.config);
      std::string line;
      while (std::getline(in, line)) {
        line = detail::trim(line.substr(0, line.find('#')));
        if (!line.empty()) plan.set(line);
      }
    }
    for (const auto& s : f.sets) plan.set(s);
    if (plan.env.name.empty()) throw InvalidArgument("sweep needs env=...");
    if (plan.seeds == 0 || plan.episodes == 0 || plan.eval_episodes == 0)
      throw InvalidArgument("seeds, episodes and eval_episodes must be positive");
    for (const auto& a : plan.algos)
      if (a != "qsft" && a != "bc" && a != "tdq" && a != "filtered-bc" && a != "rcsl")
        throw InvalidArgument("unknown algorithm '" + a + "'");
    mode = parse_mode(plan.mode);
    plan.train.validate();
    make_env(plan.env.spec(f.seed));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  const fs::path out = f.out;
  return run_with_manifest(argv, f.seed, out / "manifest.json", out / ".lock", [&](RunManifest& m) {
    if (!f.config.empty()) m.add_input(f.config);
    m.set_config({{"env", env_spec_to_json(plan.env.spec(f.seed))}, {"algos", plan.algos}, {"seeds", plan.seeds},
                  {"episodes", plan.episodes}, {"eval_episodes", plan.eval_episodes}, {"mode", plan.mode},
                  {"epsilon", plan.epsilon}, {"train", plan.train.to_json()}});
    std::vector<EvalReport> reports;
    for (std::size_t k = 0; k < plan.seeds; ++k) {
      const std::uint64_t seed = f.seed + k;
      const EnvSpec spec = plan.env.spec(f.seed);
      const Dataset raw = generate(spec, plan.episodes, seed, plan.epsilon, 0.5);
      const Dataset dataset = scale_rewards(raw, plan.train.gamma).first;
      std::shared_ptr<const Env> env = make_env(spec);
      for (const auto& algo : plan.algos) {
        TrainConfig config = plan.train;
        config.seed = seed;
        const auto art = train(algo, dataset, Featurizer(env, featurizer_buckets(algo, config)), config);
        const auto policy = make_policy(art, env, config.beta, plan.target_return);
        EvalReport report = rollout(*env, *policy, plan.eval_episodes, seed, mode);
        report.policy_id = algo;
        std::cout << "seed " << seed << " " << algo << ": " << report.undiscounted().mean << "\n";
        reports.push_back(std::move(report));
      }
    }
    const ComparisonTable table = compare(reports);
    write_text(out / "comparison.csv", table.to_csv());
    write_text(out / "comparison.txt", table.to_text());
    m.add_output(out / "comparison.csv");
    m.add_output(out / "comparison.txt");
    std::cout << table.to_text();
  });
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Q-SFT desk lab: datasets, training, value-bound checks and evaluation"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate an offline dataset");
  gen.env.add_to(gen_cmd, true);
  gen_cmd->add_option("--episodes", gen.episodes, "number of trajectories")->required();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "PATH.jsonl or output directory")->required();
  gen_cmd->add_option("--epsilon", gen.epsilon, "weight on the scripted policy (rest uniform)")->capture_default_str();
  gen_cmd->add_option("--corridor-noise", gen.corridor_noise, "stitch gridworld corridor noise")->capture_default_str();

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train a policy from a dataset");
  train_cmd->add_option("--algo", tr.algo, "qsft | bc | tdq | filtered-bc | rcsl")->required();
  train_cmd->add_option("--data", tr.data, "dataset .jsonl")->required();
  train_cmd->add_option("--config", tr.config, "key=value config file");
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  train_cmd->add_option("--set", tr.sets, "override a config key (key=value), repeatable");

  VerifyFlags ver;
  auto* verify_cmd = app.add_subcommand("verify", "check value bounds on seeded random MDPs");
  verify_cmd->add_option("--seeds", ver.seeds, "number of MDPs")->capture_default_str();
  verify_cmd->add_option("--seed", ver.seed, "base seed")->capture_default_str();
  verify_cmd->add_option("--max-states", ver.max_states, "largest state count")->capture_default_str();
  verify_cmd->add_option("--actions", ver.actions, "action count range LO..HI")->capture_default_str();
  verify_cmd->add_option("--gamma", ver.gammas, "comma-separated discounts")->capture_default_str();
  verify_cmd->add_option("--tol", ver.tol, "bound tolerance")->capture_default_str();
  verify_cmd->add_option("--branching", ver.branching, "successors per (s,a)")->capture_default_str();
  verify_cmd->add_option("--out", ver.out, "report .json or output directory")->capture_default_str();

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "roll out a trained checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "ckpt.bin")->required();
  ev.env.add_to(eval_cmd, false);
  eval_cmd->add_option("--episodes", ev.episodes, "episodes")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "random seed")->capture_default_str();
  eval_cmd->add_option("--mode", ev.mode, "sample | greedy")->capture_default_str();
  eval_cmd->add_option("--beta", ev.beta, "extraction temperature (qsft; default from config)");
  eval_cmd->add_option("--target-return", ev.target_return, "conditioning return (rcsl)")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "output directory")->capture_default_str();

  SweepFlags sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate a method x seed grid");
  sweep_cmd->add_option("--config", sw.config, "sweep config file");
  sweep_cmd->add_option("--out", sw.out, "output directory")->capture_default_str();
  sweep_cmd->add_option("--seed", sw.seed, "base seed")->capture_default_str();
  sweep_cmd->add_option("--set", sw.sets, "override a sweep key (key=value), repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  if (*gen_cmd) return cmd_gen_data(gen, args);
  if (*train_cmd) return cmd_train(tr, args);
  if (*verify_cmd) return cmd_verify(ver, args);
  if (*eval_cmd) return cmd_eval(ev, args);
  if (*sweep_cmd) return cmd_sweep(sw, args);
  return kInvalid;
}
