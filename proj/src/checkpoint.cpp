#include "prosody/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "prosody/error.hpp"

namespace prosody::nn {

using nlohmann::json;

json make_checkpoint(json sections, json meta) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["sections"] = std::move(sections);
  j["meta"] = std::move(meta);
  return j;
}

void save_checkpoint(const std::string& path, const json& ckpt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << ckpt.dump() << "\n";
}

json load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint parse failure: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) {
    throw DataError("not a prosody checkpoint: " + path);
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version in " + path);
  }
  return j;
}

}  // namespace prosody::nn
