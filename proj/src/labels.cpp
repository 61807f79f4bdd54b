#include "prosody/labels.hpp"

#include <fstream>

#include "json.hpp"
#include "prosody/error.hpp"

namespace prosody {

using nlohmann::json;

std::string to_string(LabelKind kind) {
  return kind == LabelKind::rule_based ? "rule" : "neural";
}

LabelKind label_kind_from_string(const std::string& s) {
  if (s == "rule") return LabelKind::rule_based;
  if (s == "neural") return LabelKind::neural_based;
  throw ConfigError("unknown label kind: " + s);
}

TokenValues token_average(const std::vector<double>& track,
                          const std::vector<std::uint8_t>* voiced_mask,
                          const UtteranceAlignment& alignment,
                          TokenLevel level) {
  if (alignment.total_frames() != static_cast<int>(track.size())) {
    throw DataError("alignment durations do not match track length");
  }
  if (voiced_mask != nullptr && voiced_mask->size() != track.size()) {
    throw DataError("voiced mask does not match track length");
  }
  const auto durations = alignment.durations(level);
  TokenValues out;
  out.level = level;
  out.values.reserve(durations.size());
  std::size_t t = 0;
  for (int dur : durations) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < dur; ++i, ++t) {
      if (voiced_mask != nullptr && (*voiced_mask)[t] == 0) continue;
      sum += track[t];
      ++count;
    }
    out.values.push_back(count > 0 ? sum / count : 0.0);
  }
  return out;
}

std::string ProsodyLabelSet::to_json_line() const {
  json j;
  j["utterance_id"] = utterance_id;
  j["kind"] = to_string(kind);
  j["level"] = to_string(level);
  json tokens = json::array();
  if (kind == LabelKind::rule_based) {
    for (const auto& r : rule) {
      tokens.push_back({{"f0_bin", r.f0_bin}, {"energy_bin", r.energy_bin}});
    }
  } else {
    for (const auto& n : neural) {
      tokens.push_back({{"codeword", n.codeword},
                        {"latent", {n.latent[0], n.latent[1], n.latent[2]}}});
    }
  }
  j["tokens"] = std::move(tokens);
  return j.dump();
}

ProsodyLabelSet ProsodyLabelSet::from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("label line parse failure: ") + e.what());
  }
  ProsodyLabelSet set;
  set.utterance_id = j.at("utterance_id").get<std::string>();
  set.kind = label_kind_from_string(j.at("kind").get<std::string>());
  set.level = token_level_from_string(j.at("level").get<std::string>());
  for (const auto& tok : j.at("tokens")) {
    if (set.kind == LabelKind::rule_based) {
      RuleLabel r;
      r.f0_bin = tok.at("f0_bin").get<int>();
      r.energy_bin = tok.at("energy_bin").get<int>();
      set.rule.push_back(r);
    } else {
      NeuralLabel n;
      n.codeword = tok.at("codeword").get<int>();
      const auto& lat = tok.at("latent");
      for (int i = 0; i < 3; ++i) n.latent[i] = lat.at(i).get<double>();
      set.neural.push_back(n);
    }
  }
  return set;
}

RuleChannels extract_rule_channels(const AudioBuffer& audio,
                                   const UtteranceAlignment& alignment,
                                   TokenLevel level, const FrameConfig& frames,
                                   const PitchConfig& pitch) {
  const auto spec = stft(audio, frames);
  const auto energy = frame_energy(spec);
  const auto track = estimate_f0(audio, frames, pitch);
  RuleChannels out;
  out.f0 = token_average(track.f0, &track.voiced, alignment, level);
  out.energy = token_average(energy, nullptr, alignment, level);
  return out;
}

ProsodyLabelSet extract_rule_labels(const AudioBuffer& audio,
                                    const UtteranceAlignment& alignment,
                                    TokenLevel level,
                                    const RuleQuantizers& quantizers,
                                    const FrameConfig& frames,
                                    const PitchConfig& pitch) {
  const auto channels = extract_rule_channels(audio, alignment, level, frames,
                                              pitch);
  ProsodyLabelSet set;
  set.utterance_id = alignment.utterance_id;
  set.kind = LabelKind::rule_based;
  set.level = level;
  set.rule.reserve(channels.f0.values.size());
  for (std::size_t i = 0; i < channels.f0.values.size(); ++i) {
    RuleLabel label;
    label.f0_bin = quantizers.f0.quantize(channels.f0.values[i]);
    label.energy_bin = quantizers.energy.quantize(channels.energy.values[i]);
    set.rule.push_back(label);
  }
  return set;
}

std::vector<ProsodyLabelSet> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file: " + path);
  std::vector<ProsodyLabelSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    sets.push_back(ProsodyLabelSet::from_json_line(line));
  }
  return sets;
}

void write_label_file(const std::string& path,
                      const std::vector<ProsodyLabelSet>& sets) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file: " + path);
  for (const auto& set : sets) out << set.to_json_line() << "\n";
}

}  // namespace prosody
