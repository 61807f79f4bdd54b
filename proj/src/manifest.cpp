#include "prosody/manifest.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "prosody/error.hpp"
#include "prosody/sha256.hpp"

namespace prosody::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json pairs_to_json(const std::vector<std::pair<std::string, std::string>>& v) {
  json out = json::array();
  for (const auto& [path, hash] : v) {
    out.push_back({{"path", path}, {"sha256", hash}});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> pairs_from_json(
    const json& j) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : j) {
    out.emplace_back(e.at("path").get<std::string>(),
                     e.at("sha256").get<std::string>());
  }
  return out;
}

void verify_one(const std::string& artifact_path, VerifyResult* result,
                std::set<std::string>* visited) {
  if (!visited->insert(artifact_path).second) return;
  const std::string manifest_path = artifact_path + ".manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    result->failures.push_back("missing manifest: " + manifest_path);
    return;
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    result->failures.push_back("unreadable manifest " + manifest_path + ": " +
                               e.what());
    return;
  }
  const RunManifest manifest = RunManifest::from_json(j);
  ++result->artifacts_checked;

  for (const auto& [path, recorded] : manifest.outputs) {
    if (path != artifact_path) continue;
    try {
      const std::string actual = sha256_file(path);
      if (actual != recorded) {
        result->failures.push_back("output hash mismatch: " + path);
      }
    } catch (const DataError&) {
      result->failures.push_back("output missing: " + path);
    }
  }
  for (const auto& [path, recorded] : manifest.inputs) {
    try {
      const std::string actual = sha256_file(path);
      if (actual != recorded) {
        result->failures.push_back("input hash mismatch: " + path +
                                   " (recorded in " + manifest_path + ")");
      }
    } catch (const DataError&) {
      result->failures.push_back("input missing: " + path);
      continue;
    }
    if (fs::exists(path + ".manifest.json")) {
      verify_one(path, result, visited);
    }
  }
}

}  // namespace

json RunManifest::to_json() const {
  return {{"schema_version", 1},
          {"command", command},
          {"config_hash", config_hash},
          {"tool_version", tool_version},
          {"timestamp", timestamp},
          {"inputs", pairs_to_json(inputs)},
          {"outputs", pairs_to_json(outputs)}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.value("command", "");
  m.config_hash = j.value("config_hash", "");
  m.tool_version = j.value("tool_version", "");
  m.timestamp = j.value("timestamp", "");
  if (j.contains("inputs")) m.inputs = pairs_from_json(j["inputs"]);
  if (j.contains("outputs")) m.outputs = pairs_from_json(j["outputs"]);
  return m;
}

void write_manifests(const std::string& command, const std::string& config_hash,
                     const std::vector<std::string>& input_paths,
                     const std::vector<std::string>& output_paths) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = config_hash;
  manifest.timestamp = utc_now();
  std::set<std::string> seen;
  for (const auto& path : input_paths) {
    if (!seen.insert(path).second) continue;
    manifest.inputs.emplace_back(path, sha256_file(path));
  }
  for (const auto& path : output_paths) {
    manifest.outputs.emplace_back(path, sha256_file(path));
  }
  const json j = manifest.to_json();
  for (const auto& path : output_paths) {
    std::ofstream out(path + ".manifest.json");
    if (!out) throw DataError("cannot write manifest for " + path);
    out << j.dump(2) << "\n";
  }
}

VerifyResult verify_artifact(const std::string& artifact_path) {
  VerifyResult result;
  std::set<std::string> visited;
  verify_one(artifact_path, &result, &visited);
  return result;
}

VerifyResult verify_tree(const std::string& dir) {
  VerifyResult result;
  std::set<std::string> visited;
  std::vector<std::string> artifacts;
  if (!fs::exists(dir)) {
    result.failures.push_back("artifact directory missing: " + dir);
    return result;
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string p = entry.path().string();
    const std::string suffix = ".manifest.json";
    if (p.size() > suffix.size() &&
        p.compare(p.size() - suffix.size(), suffix.size(), suffix) == 0) {
      artifacts.push_back(p.substr(0, p.size() - suffix.size()));
    }
  }
  std::sort(artifacts.begin(), artifacts.end());
  for (const auto& artifact : artifacts) {
    verify_one(artifact, &result, &visited);
  }
  return result;
}

}  // namespace prosody::cli
