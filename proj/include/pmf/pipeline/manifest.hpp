#pragma once

#include <chrono>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pmf/core/config.hpp"

namespace pmf::pipeline {

/// git-describe style version baked in at configure time.
std::string tool_version();

/// Written as manifest.json into every output directory, replacing any
/// previous one.
struct RunManifest {
  static constexpr int kVersion = 1;
  static constexpr const char* kFileName = "manifest.json";

  std::string command;
  PipelineConfig config;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
  nlohmann::json summary = nlohmann::json::object();

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);

  void write(const std::string& out_dir) const;
  static RunManifest read(const std::string& path);
};

/// Wall-clock timing of consecutive stages.
class StageTimer {
 public:
  explicit StageTimer(RunManifest& manifest) : manifest_(manifest) {}
  /// Closes the running stage (if any) and opens `name`.
  void start(const std::string& name);
  void stop();
  ~StageTimer() { stop(); }

 private:
  RunManifest& manifest_;
  std::string current_;
  std::chrono::steady_clock::time_point begin_;
};

}  // namespace pmf::pipeline
