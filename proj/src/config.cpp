#include "prosody/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "prosody/error.hpp"
#include "prosody/sha256.hpp"

namespace prosody::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void apply_override(json& doc, const std::string& setting) {
  const auto eq = setting.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like key.path=value: " + setting);
  }
  const std::string key = setting.substr(0, eq);
  const std::string value = setting.substr(eq + 1);
  json* node = &doc;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  if (path.empty()) throw ConfigError("empty override key: " + setting);
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    node = &(*node)[path[i]];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // plain string
  }
  (*node)[path.back()] = parsed;
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).string();
}

nn::TrainConfig train_section(const json& doc, const char* name,
                              const nn::TrainConfig& defaults) {
  if (!doc.contains("train") || !doc["train"].contains(name)) return defaults;
  json merged = defaults.to_json();
  merged.update(doc["train"][name]);
  return nn::TrainConfig::from_json(merged);
}

}  // namespace

std::string ProjectConfig::wav_path(const std::string& id) const {
  return corpus_dir + "/wavs/" + id + ".wav";
}

std::string ProjectConfig::alignment_path(const std::string& id) const {
  return corpus_dir + "/alignments/" + id + ".json";
}

std::string ProjectConfig::artifact(const std::string& name) const {
  return artifacts_dir + "/" + name;
}

ProjectConfig load_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  for (const auto& setting : overrides) apply_override(doc, setting);

  ProjectConfig cfg;
  cfg.raw = doc;
  cfg.config_hash = sha256_hex(doc.dump());
  const fs::path base = fs::path(path).parent_path();

  const json audio = doc.value("audio", json::object());
  cfg.sample_rate = audio.value("sample_rate", cfg.sample_rate);
  cfg.frames.frame_length = audio.value("frame_length", cfg.frames.frame_length);
  cfg.frames.hop_length = audio.value("hop_length", cfg.frames.hop_length);
  cfg.frames.fft_size = audio.value("fft_size", cfg.frames.fft_size);
  cfg.mel.n_mels = audio.value("n_mels", cfg.mel.n_mels);
  cfg.mel.fmin = audio.value("fmin", cfg.mel.fmin);
  cfg.mel.fmax = audio.value("fmax", cfg.mel.fmax);
  cfg.mel.log_compress = audio.value("log_mel", cfg.mel.log_compress);
  cfg.pitch.f0_floor = audio.value("f0_floor", cfg.pitch.f0_floor);
  cfg.pitch.f0_ceil = audio.value("f0_ceil", cfg.pitch.f0_ceil);
  cfg.pitch.voicing_threshold =
      audio.value("voicing_threshold", cfg.pitch.voicing_threshold);
  validate(cfg.frames);
  validate(cfg.pitch, cfg.sample_rate);

  const json paths = doc.value("paths", json::object());
  cfg.corpus_dir = resolve(base, paths.value("corpus_dir", "corpus"));
  cfg.embeddings = resolve(base, paths.value("embeddings", ""));
  cfg.artifacts_dir = resolve(base, paths.value("artifacts_dir", "artifacts"));
  cfg.train_split = resolve(base, paths.value("train_split", "splits/train.txt"));
  cfg.test_split = resolve(base, paths.value("test_split", "splits/test.txt"));

  const json quant = doc.value("quantizer", json::object());
  cfg.n_bins = quant.value("n_bins", cfg.n_bins);
  if (quant.contains("f0_scale")) {
    cfg.f0_scale = quantizer_scale_from_string(quant["f0_scale"]);
  }
  if (quant.contains("energy_scale")) {
    cfg.energy_scale = quantizer_scale_from_string(quant["energy_scale"]);
  }

  json vq_section = cfg.ref_encoder.to_json();
  if (doc.contains("vq")) vq_section.update(doc["vq"]);
  cfg.ref_encoder = vq::RefEncoderConfig::from_json(vq_section);
  cfg.ref_encoder.n_mels = cfg.mel.n_mels;
  if (doc.contains("vq") && doc["vq"].contains("level")) {
    cfg.vq_level = token_level_from_string(doc["vq"]["level"]);
  }

  const json predictor = doc.value("predictor", json::object());
  cfg.predictor_channels = predictor.value("conv_channels", cfg.predictor_channels);
  cfg.predictor_kernel = predictor.value("kernel", cfg.predictor_kernel);
  cfg.predictor_dropout = predictor.value("dropout", cfg.predictor_dropout);
  cfg.phoneme_feature_dim =
      predictor.value("phoneme_feature_dim", cfg.phoneme_feature_dim);
  cfg.hier_teacher_force =
      predictor.value("teacher_force", cfg.hier_teacher_force);
  cfg.hier_embed_discrete =
      predictor.value("embed_discrete", cfg.hier_embed_discrete);

  cfg.seed = doc.value("seed", cfg.seed);

  // training recipes; the word predictor defaults to the constant-rate
  // recipe, everything else to warmup-inverse-sqrt
  nn::TrainConfig ref_default;
  ref_default.schedule = nn::LrSchedule::warmup_inverse_sqrt;
  ref_default.warmup_steps = 400;
  ref_default.model_dim = 256;
  ref_default.total_steps = 2000;
  ref_default.batch_size = 8;
  ref_default.rng_seed = cfg.seed * 7919 + 1;
  nn::TrainConfig word_default;
  word_default.schedule = nn::LrSchedule::constant;
  word_default.learning_rate = 1e-4;
  word_default.total_steps = 3000;
  word_default.batch_size = 16;
  word_default.rng_seed = cfg.seed * 7919 + 2;
  nn::TrainConfig phoneme_default;
  phoneme_default.schedule = nn::LrSchedule::warmup_inverse_sqrt;
  phoneme_default.warmup_steps = 400;
  phoneme_default.model_dim = 256;
  phoneme_default.total_steps = 3000;
  phoneme_default.batch_size = 16;
  phoneme_default.rng_seed = cfg.seed * 7919 + 3;
  cfg.train_ref = train_section(doc, "ref_encoder", ref_default);
  cfg.train_word = train_section(doc, "word", word_default);
  cfg.train_phoneme = train_section(doc, "phoneme", phoneme_default);
  cfg.snapshot_interval =
      doc.value("train", json::object()).value("snapshot_interval", 500);

  cfg.gpe_threshold =
      doc.value("metrics", json::object()).value("gpe_threshold", 0.2);

  return cfg;
}

std::vector<std::string> read_split_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace prosody::cli
