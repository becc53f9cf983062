#include "pmf/pipeline/manifest.hpp"

#include <filesystem>

#include "pmf/core/annotations.hpp"
#include "pmf/core/errors.hpp"

#ifndef PMF_VERSION
#define PMF_VERSION "0.1.0"
#endif

namespace pmf::pipeline {

std::string tool_version() { return PMF_VERSION; }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& [stage, secs] : timings) t.push_back({{"stage", stage}, {"seconds", secs}});
  return {{"manifest_version", kVersion},
          {"tool_version", tool_version()},
          {"command", command},
          {"seed", config.seed},
          {"config", config.to_json()},
          {"inputs", inputs},
          {"outputs", outputs},
          {"timings", std::move(t)},
          {"summary", summary}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    const int v = j.at("manifest_version").get<int>();
    if (v != kVersion) throw VersionError("manifest", static_cast<unsigned>(v), kVersion);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = PipelineConfig::from_json(j.at("config"));
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    for (const auto& t : j.at("timings")) m.timings.emplace_back(t.at("stage").get<std::string>(), t.at("seconds").get<double>());
    m.summary = j.value("summary", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

void RunManifest::write(const std::string& out_dir) const {
  std::filesystem::create_directories(out_dir);
  write_text_file((std::filesystem::path(out_dir) / kFileName).string(), to_json().dump(2) + "\n");
}

RunManifest RunManifest::read(const std::string& path) { return from_json(read_json_file(path)); }

void StageTimer::start(const std::string& name) {
  stop();
  current_ = name;
  begin_ = std::chrono::steady_clock::now();
}

void StageTimer::stop() {
  if (current_.empty()) return;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin_).count();
  manifest_.timings.emplace_back(current_, secs);
  current_.clear();
}

}  // namespace pmf::pipeline
