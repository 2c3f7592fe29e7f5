#pragma once

// JSON-lines dataset files with a sidecar metadata document.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qsft/mdp.hpp"

namespace qsft {

namespace detail {

inline nlohmann::json obs_to_json(const Obs& obs, bool tabular) {
  if (tabular) return obs.at(0);
  return obs;
}

inline Obs obs_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return Obs{j.get<int>()};
  if (j.is_array()) return j.get<Obs>();
  throw InvalidArgument("observation must be an integer or an integer array");
}

}  // namespace detail

inline nlohmann::json meta_to_json(const DatasetMeta& meta) {
  nlohmann::json j;
  j["env"] = meta.env;
  j["gamma"] = meta.gamma;
  j["reward_scale"] = meta.reward_scale;
  j["seed"] = meta.seed;
  j["num_trajectories"] = meta.num_trajectories;
  j["num_actions"] = meta.num_actions;
  j["num_states"] = meta.num_states;
  j["tabular"] = meta.tabular;
  j["epsilon"] = meta.epsilon;
  j["params"] = meta.params;
  return j;
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta meta;
  meta.env = j.at("env").get<std::string>();
  meta.gamma = j.at("gamma").get<double>();
  meta.reward_scale = j.at("reward_scale").get<double>();
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.num_trajectories = j.at("num_trajectories").get<std::size_t>();
  meta.num_actions = j.value("num_actions", std::size_t{0});
  meta.num_states = j.value("num_states", std::size_t{0});
  meta.tabular = j.value("tabular", true);
  meta.epsilon = j.value("epsilon", 1.0);
  if (j.contains("params")) meta.params = j.at("params").get<std::map<std::string, double>>();
  return meta;
}

inline std::string transition_to_jsonl(const Transition& t, bool tabular) {
  nlohmann::json j;
  j["traj_id"] = t.traj_id;
  j["t"] = t.step_index;
  j["s"] = detail::obs_to_json(t.state, tabular);
  j["a"] = t.action;
  j["r"] = t.reward;
  j["s2"] = detail::obs_to_json(t.next_state, tabular);
  j["done"] = t.done;
  return j.dump();
}

inline Transition transition_from_json(const nlohmann::json& j) {
  Transition t;
  t.traj_id = j.at("traj_id").get<int>();
  t.step_index = j.at("t").get<int>();
  t.state = detail::obs_from_json(j.at("s"));
  t.action = j.at("a").get<int>();
  t.reward = j.at("r").get<double>();
  t.next_state = detail::obs_from_json(j.at("s2"));
  t.done = j.at("done").get<bool>();
  return t;
}

/// Sidecar path for a dataset file: `meta.json` next to `dataset.jsonl`,
/// otherwise `<stem>.meta.json`.
inline std::filesystem::path meta_path_for(const std::filesystem::path& dataset_path) {
  if (dataset_path.filename() == "dataset.jsonl") return dataset_path.parent_path() / "meta.json";
  auto p = dataset_path;
  p.replace_extension(".meta.json");
  return p;
}

inline void write_dataset(const Dataset& dataset, const std::filesystem::path& dataset_path) {
  std::ofstream out(dataset_path, std::ios::binary);
  if (!out) throw IoError("cannot open " + dataset_path.string() + " for writing");
  const bool tabular = dataset.meta().tabular;
  for (const auto& t : dataset.transitions()) out << transition_to_jsonl(t, tabular) << '\n';
  out.close();
  if (!out) throw IoError("failed writing " + dataset_path.string());

  const auto meta_path = meta_path_for(dataset_path);
  std::ofstream meta_out(meta_path, std::ios::binary);
  if (!meta_out) throw IoError("cannot open " + meta_path.string() + " for writing");
  meta_out << meta_to_json(dataset.meta()).dump(2) << '\n';
  if (!meta_out) throw IoError("failed writing " + meta_path.string());
}

inline Dataset read_dataset(const std::filesystem::path& dataset_path) {
  std::ifstream in(dataset_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + dataset_path.string());
  std::vector<Transition> transitions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      transitions.push_back(transition_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(dataset_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto meta_path = meta_path_for(dataset_path);
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw IoError("cannot open metadata " + meta_path.string());
  DatasetMeta meta;
  try {
    meta = meta_from_json(nlohmann::json::parse(meta_in));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(meta_path.string() + ": " + e.what());
  }
  const std::size_t declared = meta.num_trajectories;
  Dataset dataset(std::move(transitions), std::move(meta));
  require(dataset.num_trajectories() == declared,
          "metadata declares " + std::to_string(declared) + " trajectories, file has " +
              std::to_string(dataset.num_trajectories()));
  return dataset;
}

}  // namespace qsft
