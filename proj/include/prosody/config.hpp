#ifndef PROSODY_CONFIG_HPP_
#define PROSODY_CONFIG_HPP_

#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/mel.hpp"
#include "prosody/optimizer.hpp"
#include "prosody/pitch.hpp"
#include "prosody/predictor.hpp"
#include "prosody/quantizer.hpp"
#include "prosody/ref_encoder.hpp"
#include "prosody/stft.hpp"

namespace prosody::cli {

// Declarative project configuration: one JSON file, overridable from the
// command line with --set dotted.key=value. Relative paths resolve against
// the config file's directory.
struct ProjectConfig {
  // audio analysis
  int sample_rate = 22050;
  FrameConfig frames;
  MelConfig mel;
  PitchConfig pitch;

  // corpus layout
  std::string corpus_dir;     // wavs/<id>.wav and alignments/<id>.json
  std::string embeddings;    // word-vector file ("dim D" header format)
  std::string artifacts_dir;
  std::string train_split;
  std::string test_split;

  // rule-label quantization
  int n_bins = 256;
  QuantizerScale f0_scale = QuantizerScale::log;
  QuantizerScale energy_scale = QuantizerScale::linear;

  // neural labels
  vq::RefEncoderConfig ref_encoder;
  TokenLevel vq_level = TokenLevel::phoneme;

  // predictors
  int predictor_channels = 256;
  int predictor_kernel = 3;
  double predictor_dropout = 0.5;
  int phoneme_feature_dim = 256;
  bool hier_teacher_force = true;
  bool hier_embed_discrete = true;  // false: raw-continuous projection

  // training recipes
  nn::TrainConfig train_ref;
  nn::TrainConfig train_word;
  nn::TrainConfig train_phoneme;
  int snapshot_interval = 500;  // steps between resumable snapshots

  // evaluation
  double gpe_threshold = 0.2;

  std::uint64_t seed = 1;

  // provenance
  std::string config_hash;  // sha256 of the canonical merged document
  nlohmann::json raw;

  std::string wav_path(const std::string& id) const;
  std::string alignment_path(const std::string& id) const;
  std::string artifact(const std::string& name) const;
};

// Parses, applies overrides ("a.b.c=value", value parsed as JSON when
// possible), resolves paths, and hashes the merged document.
ProjectConfig load_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

// One utterance id per non-empty line.
std::vector<std::string> read_split_file(const std::string& path);

}  // namespace prosody::cli

#endif  // PROSODY_CONFIG_HPP_
