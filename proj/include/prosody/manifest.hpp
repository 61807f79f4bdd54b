#ifndef PROSODY_MANIFEST_HPP_
#define PROSODY_MANIFEST_HPP_

#include <string>
#include <vector>

#include "json.hpp"

namespace prosody::cli {

inline constexpr const char* kToolVersion = "prosody-toolkit 0.1.0";

// Provenance record written next to every artifact as
// <artifact>.manifest.json. Inputs hash-chain to their own manifests when
// those exist, so verify() can walk a whole pipeline.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string timestamp;  // UTC, informational only
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Hashes every input/output and writes one manifest per output artifact.
void write_manifests(const std::string& command, const std::string& config_hash,
                     const std::vector<std::string>& input_paths,
                     const std::vector<std::string>& output_paths);

struct VerifyResult {
  int artifacts_checked = 0;
  std::vector<std::string> failures;  // human-readable mismatch descriptions

  bool ok() const { return failures.empty(); }
};

// Re-hashes the artifact and all recorded inputs, recursing into inputs that
// carry manifests of their own.
VerifyResult verify_artifact(const std::string& artifact_path);

// Verifies every *.manifest.json under a directory.
VerifyResult verify_tree(const std::string& dir);

}  // namespace prosody::cli

#endif  // PROSODY_MANIFEST_HPP_
