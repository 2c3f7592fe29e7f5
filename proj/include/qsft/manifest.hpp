#pragma once

// Run manifests with SHA-256 file digests, and an exclusive lock on an
// output directory. Needs libcrypto.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsft/common.hpp"

namespace qsft {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for hashing");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct FileDigest {
  std::string path;
  std::string sha256;
};

class RunManifest {
 public:
  RunManifest(std::vector<std::string> argv, std::uint64_t seed)
      : argv_(std::move(argv)), seed_(seed), started_(utc_timestamp()) {}

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& p) { inputs_.push_back({p.string(), sha256_file(p)}); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back({p.string(), sha256_file(p)}); }
  void warn(const std::string& message) { warnings_.push_back(message); }
  void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

  nlohmann::json to_json(int exit_code, const std::string& error) const {
    std::string command;
    for (const auto& a : argv_) command += (command.empty() ? "" : " ") + a;
    nlohmann::json j;
    j["command"] = command;
    j["argv"] = argv_;
    j["seed"] = seed_;
    j["config"] = config_;
    auto digests = [](const std::vector<FileDigest>& files) {
      auto arr = nlohmann::json::array();
      for (const auto& f : files) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
      return arr;
    };
    j["inputs"] = digests(inputs_);
    j["outputs"] = digests(outputs_);
    j["started"] = started_;
    j["finished"] = utc_timestamp();
    j["exit_code"] = exit_code;
    j["status"] = exit_code == 0 ? "ok" : "error";
    if (!error.empty()) j["error"] = error;
    j["warnings"] = warnings_;
    if (!notes_.empty()) j["notes"] = notes_;
    return j;
  }

  void write(const std::filesystem::path& path, int exit_code, const std::string& error = "") const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << to_json(exit_code, error).dump(2) << '\n';
  }

 private:
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  std::string started_;
  nlohmann::json config_ = nlohmann::json::object();
  std::vector<FileDigest> inputs_, outputs_;
  std::vector<std::string> warnings_;
  nlohmann::json notes_ = nlohmann::json::object();
};

/// Files listed in a manifest whose current digest differs (or which are
/// missing).
inline std::vector<std::string> stale_manifest_entries(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<std::string> stale;
  for (const char* key : {"inputs", "outputs"})
    for (const auto& f : j.at(key)) {
      const auto path = f.at("path").get<std::string>();
      if (!std::filesystem::exists(path) || sha256_file(path) != f.at("sha256").get<std::string>())
        stale.push_back(path);
    }
  return stale;
}

/// Exclusive lock file; creation fails if another run holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(std::filesystem::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("output is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

}  // namespace qsft
