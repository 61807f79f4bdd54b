#include "prosody/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "prosody/audio.hpp"
#include "prosody/checkpoint.hpp"
#include "prosody/embeddings.hpp"
#include "prosody/error.hpp"
#include "prosody/manifest.hpp"
#include "prosody/metrics.hpp"
#include "prosody/predictor.hpp"
#include "prosody/ref_encoder.hpp"
#include "prosody/sha256.hpp"

namespace prosody::cli {

using nlohmann::json;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTargetGrammar =
    "valid targets: ref-encoder | predictor:{P|W}+{R|N} | "
    "predictor:H(W+{R|N},P+{R|N})";

LabelKind kind_of_char(char c, const std::string& target) {
  if (c == 'R') return LabelKind::rule_based;
  if (c == 'N') return LabelKind::neural_based;
  throw ConfigError("unknown label kind in target '" + target + "'; " +
                    kTargetGrammar);
}

struct LoadedUtterance {
  std::string id;
  AudioBuffer audio;
  UtteranceAlignment alignment;
};

LoadedUtterance load_utterance(const ProjectConfig& cfg,
                               const std::string& id) {
  LoadedUtterance u;
  u.id = id;
  u.audio = read_wav(cfg.wav_path(id));
  if (u.audio.sample_rate != cfg.sample_rate) {
    throw DataError("sample rate of " + cfg.wav_path(id) + " is " +
                    std::to_string(u.audio.sample_rate) + ", config wants " +
                    std::to_string(cfg.sample_rate) + " (no resampling)");
  }
  const int total = frame_count(u.audio.samples.size(), cfg.frames);
  u.alignment =
      parse_alignment_file(cfg.alignment_path(id), cfg.sample_rate,
                           cfg.frames.hop_length, total);
  u.alignment.utterance_id = id;
  return u;
}

std::string labels_artifact(const ProjectConfig& cfg, LabelKind kind,
                            TokenLevel level, const std::string& split) {
  return cfg.artifact("labels_" + to_string(kind) + "_" + to_string(level) +
                      "_" + split + ".jsonl");
}

RuleQuantizers load_quantizers(const ProjectConfig& cfg) {
  const std::string f0_path = cfg.artifact("quantizer_f0.json");
  const std::string energy_path = cfg.artifact("quantizer_energy.json");
  if (!fs::exists(f0_path) || !fs::exists(energy_path)) {
    throw DataError(
        "fitted quantizers not found in " + cfg.artifacts_dir +
        "; run `prosody extract --kind rule` first");
  }
  return RuleQuantizers{Quantizer::load(f0_path), Quantizer::load(energy_path)};
}

struct RefEncoderArtifacts {
  vq::RefEncoder encoder;
  vq::Codebook codebook;
};

RefEncoderArtifacts load_ref_encoder(const ProjectConfig& cfg) {
  const std::string path = cfg.artifact("ref_encoder.ckpt.json");
  if (!fs::exists(path)) {
    throw DataError("reference encoder checkpoint not found at " + path +
                    "; train it first with `prosody train --target "
                    "ref-encoder`");
  }
  const json ckpt = nn::load_checkpoint(path);
  return RefEncoderArtifacts{
      vq::RefEncoder::from_json(ckpt.at("sections").at("encoder")),
      vq::Codebook::from_json(ckpt.at("sections").at("codebook"))};
}

std::vector<std::string> collect_symbols(const ProjectConfig& cfg,
                                         const std::vector<std::string>& ids) {
  std::set<std::string> set;
  for (const auto& id : ids) {
    const auto ali = parse_alignment_file_text_only(
        cfg.alignment_path(id), cfg.sample_rate, cfg.frames.hop_length);
    for (const auto& p : ali.phonemes) set.insert(p.symbol);
  }
  std::vector<std::string> symbols{"<unk>"};
  symbols.insert(symbols.end(), set.begin(), set.end());
  return symbols;
}

std::map<std::string, ProsodyLabelSet> load_label_map(const std::string& path) {
  if (!fs::exists(path)) {
    throw DataError("label file not found: " + path +
                    "; run `prosody extract` for the required kind/level");
  }
  std::map<std::string, ProsodyLabelSet> map;
  for (auto& set : read_label_file(path)) {
    map[set.utterance_id] = std::move(set);
  }
  return map;
}

struct DatasetBundle {
  std::vector<pred::PredictorSample> samples;
  long oov_words = 0;
  std::vector<std::string> inputs;  // manifest chain
};

// Builds predictor samples for one split. Word parts are filled when
// want_word, phoneme parts when want_phoneme.
DatasetBundle build_samples(const ProjectConfig& cfg,
                            const std::vector<std::string>& ids,
                            const std::string& split, bool want_word,
                            LabelKind word_kind, bool want_phoneme,
                            LabelKind phoneme_kind,
                            const pred::WordEmbeddings* embeddings,
                            const pred::PhonemePredictor* symbol_source,
                            const std::vector<std::string>* symbols,
                            const RuleQuantizers* quantizers,
                            const vq::Codebook* codebook) {
  DatasetBundle bundle;
  std::map<std::string, ProsodyLabelSet> word_labels, phoneme_labels;
  if (want_word) {
    const auto path = labels_artifact(cfg, word_kind, TokenLevel::word, split);
    word_labels = load_label_map(path);
    bundle.inputs.push_back(path);
  }
  if (want_phoneme) {
    const auto path =
        labels_artifact(cfg, phoneme_kind, TokenLevel::phoneme, split);
    phoneme_labels = load_label_map(path);
    bundle.inputs.push_back(path);
  }

  auto symbol_id = [&](const std::string& s) -> int {
    if (symbol_source != nullptr) return symbol_source->symbol_id(s);
    for (std::size_t i = 0; i < symbols->size(); ++i) {
      if ((*symbols)[i] == s) return static_cast<int>(i);
    }
    return 0;
  };

  for (const auto& id : ids) {
    const auto ali = parse_alignment_file_text_only(
        cfg.alignment_path(id), cfg.sample_rate, cfg.frames.hop_length);
    pred::PredictorSample sample;
    sample.utterance_id = id;
    sample.phones_per_word = ali.phonemes_per_word();

    if (want_word) {
      const auto it = word_labels.find(id);
      if (it == word_labels.end()) {
        throw DataError("no word-level labels for utterance " + id);
      }
      if (it->second.token_count() != static_cast<int>(ali.words.size())) {
        throw DataError("word label count mismatch for utterance " + id);
      }
      sample.word = pred::targets_from_labels(it->second, quantizers, codebook);
      if (embeddings == nullptr) {
        throw ConfigError("word-level features need an embeddings file; set "
                          "paths.embeddings in the config");
      }
      sample.word_features =
          Tensor({static_cast<int>(ali.words.size()), embeddings->dim});
      for (std::size_t w = 0; w < ali.words.size(); ++w) {
        const auto vec =
            embeddings->lookup(ali.words[w].text, &bundle.oov_words);
        for (int d = 0; d < embeddings->dim; ++d) {
          sample.word_features.at(static_cast<int>(w), d) = vec[d];
        }
      }
    }
    if (want_phoneme) {
      const auto it = phoneme_labels.find(id);
      if (it == phoneme_labels.end()) {
        throw DataError("no phoneme-level labels for utterance " + id);
      }
      if (it->second.token_count() != static_cast<int>(ali.phonemes.size())) {
        throw DataError("phoneme label count mismatch for utterance " + id);
      }
      sample.phoneme =
          pred::targets_from_labels(it->second, quantizers, codebook);
      for (const auto& p : ali.phonemes) {
        sample.phoneme_ids.push_back(symbol_id(p.symbol));
      }
    }
    bundle.samples.push_back(std::move(sample));
    bundle.inputs.push_back(cfg.alignment_path(id));
  }
  return bundle;
}

void write_loss_csv(const std::string& path,
                    const pred::PredictorTrainReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write loss curve: " + path);
  out << "step,loss\n";
  out.precision(17);
  for (const auto& [step, loss] : report.curve) {
    out << step << "," << loss << "\n";
  }
}

// Evaluation used for training metadata and the predictability report:
// predictions are discretized exactly like persisted label files, mapped
// back to the continuous domain, and compared against the ground-truth
// targets. Rerunning the comparison from dumped files gives the same number.
struct EvalMae {
  std::vector<double> per_channel;
  double combined = 0.0;
  long tokens = 0;

  json to_json(LabelKind kind) const {
    json j;
    j["combined"] = combined;
    j["tokens"] = tokens;
    if (kind == LabelKind::rule_based && per_channel.size() == 2) {
      j["f0_mae"] = per_channel[0];
      j["energy_mae"] = per_channel[1];
    } else {
      j["per_channel"] = per_channel;
    }
    return j;
  }
};

EvalMae eval_against_targets(const std::vector<Tensor>& discretized,
                             const std::vector<const pred::TokenTargets*>& gt) {
  EvalMae out;
  if (discretized.empty()) return out;
  const int dim = discretized[0].cols();
  out.per_channel.assign(dim, 0.0);
  for (std::size_t s = 0; s < discretized.size(); ++s) {
    const auto& pred_t = discretized[s];
    const auto& target = gt[s]->continuous;
    for (int r = 0; r < pred_t.rows(); ++r) {
      for (int d = 0; d < dim; ++d) {
        out.per_channel[d] += std::abs(pred_t.at(r, d) - target.at(r, d));
      }
      ++out.tokens;
    }
  }
  for (auto& v : out.per_channel) v /= static_cast<double>(out.tokens);
  for (double v : out.per_channel) out.combined += v;
  out.combined /= dim;
  return out;
}

Tensor discretize_continuous(const Tensor& continuous, LabelKind kind,
                             const RuleQuantizers* rq,
                             const vq::Codebook* cb) {
  const auto labels = pred::labels_from_prediction(
      continuous, kind, TokenLevel::word, "eval", rq, cb);
  Tensor out(continuous.shape);
  if (kind == LabelKind::rule_based) {
    for (int i = 0; i < out.rows(); ++i) {
      out.at(i, 0) = rq->f0.dequantize(labels.rule[i].f0_bin);
      out.at(i, 1) = rq->energy.dequantize(labels.rule[i].energy_bin);
    }
  } else {
    for (int i = 0; i < out.rows(); ++i) {
      for (int k = 0; k < 3; ++k) out.at(i, k) = labels.neural[i].latent[k];
    }
  }
  return out;
}

std::uint64_t slug_seed(const ProjectConfig& cfg, const std::string& slug) {
  std::uint64_t h = cfg.seed * 1000003ull;
  for (char c : slug) h = h * 131 + static_cast<unsigned char>(c);
  return h;
}

}  // namespace

std::string TrainTarget::slug() const {
  if (ref_encoder) return "ref_encoder";
  auto k = [](LabelKind kind) {
    return kind == LabelKind::rule_based ? "R" : "N";
  };
  switch (arch) {
    case Arch::phoneme:
      return std::string("predictor_P_") + k(phoneme_kind);
    case Arch::word:
      return std::string("predictor_W_") + k(word_kind);
    case Arch::hierarchical:
      return std::string("predictor_H_W_") + k(word_kind) + "_P_" +
             k(phoneme_kind);
  }
  return "predictor";
}

TrainTarget parse_target(const std::string& target) {
  TrainTarget t;
  if (target == "ref-encoder") {
    t.ref_encoder = true;
    return t;
  }
  const std::string prefix = "predictor:";
  if (target.rfind(prefix, 0) != 0) {
    throw ConfigError("unknown target '" + target + "'; " + kTargetGrammar);
  }
  const std::string spec = target.substr(prefix.size());
  if (spec.size() == 3 && (spec[0] == 'P' || spec[0] == 'W') &&
      spec[1] == '+') {
    t.arch = spec[0] == 'P' ? TrainTarget::Arch::phoneme
                            : TrainTarget::Arch::word;
    const LabelKind kind = kind_of_char(spec[2], target);
    t.word_kind = kind;
    t.phoneme_kind = kind;
    return t;
  }
  // H(W+K,P+K)
  if (spec.size() == 10 && spec.rfind("H(W+", 0) == 0 && spec[5] == ',' &&
      spec.substr(6, 2) == "P+" && spec[9] == ')') {
    t.arch = TrainTarget::Arch::hierarchical;
    t.word_kind = kind_of_char(spec[4], target);
    t.phoneme_kind = kind_of_char(spec[8], target);
    return t;
  }
  throw ConfigError("unknown target '" + target + "'; " + kTargetGrammar);
}

int cmd_extract(const ProjectConfig& cfg, LabelKind kind, TokenLevel level) {
  fs::create_directories(cfg.artifacts_dir);
  const auto train_ids = read_split_file(cfg.train_split);
  const auto test_ids = read_split_file(cfg.test_split);

  long skipped = 0, total = 0;
  std::vector<std::string> inputs;
  auto try_load = [&](const std::string& id) -> std::optional<LoadedUtterance> {
    ++total;
    try {
      auto u = load_utterance(cfg, id);
      inputs.push_back(cfg.wav_path(id));
      inputs.push_back(cfg.alignment_path(id));
      return u;
    } catch (const DataError& e) {
      ++skipped;
      std::cerr << "warning: skipping utterance " << id << ": " << e.what()
                << "\n";
      return std::nullopt;
    }
  };

  std::vector<std::string> outputs;
  if (kind == LabelKind::rule_based) {
    // pass 1: fit quantizers on the training split only
    std::vector<double> f0_values, energy_values;
    std::vector<std::optional<LoadedUtterance>> train_loaded;
    for (const auto& id : train_ids) {
      auto u = try_load(id);
      if (u) {
        const auto channels = extract_rule_channels(
            u->audio, u->alignment, level, cfg.frames, cfg.pitch);
        f0_values.insert(f0_values.end(), channels.f0.values.begin(),
                         channels.f0.values.end());
        energy_values.insert(energy_values.end(),
                             channels.energy.values.begin(),
                             channels.energy.values.end());
      }
      train_loaded.push_back(std::move(u));
    }
    const RuleQuantizers quantizers{
        Quantizer::fit(f0_values, cfg.n_bins, cfg.f0_scale),
        Quantizer::fit(energy_values, cfg.n_bins, cfg.energy_scale)};
    const std::string f0_path = cfg.artifact("quantizer_f0.json");
    const std::string energy_path = cfg.artifact("quantizer_energy.json");
    quantizers.f0.save(f0_path);
    quantizers.energy.save(energy_path);
    outputs.push_back(f0_path);
    outputs.push_back(energy_path);

    // pass 2: emit labels per split
    auto emit = [&](const std::vector<std::string>& ids,
                    const std::vector<std::optional<LoadedUtterance>>* cache,
                    const std::string& split) {
      std::vector<ProsodyLabelSet> sets;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        std::optional<LoadedUtterance> u =
            cache != nullptr ? (*cache)[i] : try_load(ids[i]);
        if (!u) continue;
        sets.push_back(extract_rule_labels(u->audio, u->alignment, level,
                                           quantizers, cfg.frames, cfg.pitch));
      }
      const std::string path = labels_artifact(cfg, kind, level, split);
      write_label_file(path, sets);
      outputs.push_back(path);
    };
    emit(train_ids, &train_loaded, "train");
    emit(test_ids, nullptr, "test");
  } else {
    auto ref = load_ref_encoder(cfg);
    inputs.push_back(cfg.artifact("ref_encoder.ckpt.json"));
    auto emit = [&](const std::vector<std::string>& ids,
                    const std::string& split) {
      std::vector<ProsodyLabelSet> sets;
      for (const auto& id : ids) {
        auto u = try_load(id);
        if (!u) continue;
        const auto spec = stft(u->audio, cfg.frames);
        const auto mel = mel_spectrogram(spec, cfg.mel);
        ProsodyLabelSet set;
        set.utterance_id = id;
        set.kind = LabelKind::neural_based;
        set.level = level;
        set.neural = vq::extract_neural_labels(
            ref.encoder, ref.codebook, mel, u->alignment.durations(level));
        sets.push_back(std::move(set));
      }
      const std::string path = labels_artifact(cfg, kind, level, split);
      write_label_file(path, sets);
      outputs.push_back(path);
    };
    emit(train_ids, "train");
    emit(test_ids, "test");
  }

  write_manifests("extract", cfg.config_hash, inputs, outputs);
  if (total > 0 && skipped * 20 > total) {  // more than 5% skipped
    throw DataError(std::to_string(skipped) + " of " + std::to_string(total) +
                    " utterances skipped during extraction");
  }
  return 0;
}

namespace {

// Chunked training with resumable snapshots between chunks. inner_state is
// the raw driver state; wrap() decorates it for the snapshot file (stage
// bookkeeping for two-stage targets).
template <typename TrainFn, typename WrapFn>
pred::PredictorTrainReport train_in_chunks(const ProjectConfig& cfg,
                                           const nn::TrainConfig& tc,
                                           const std::string& state_path,
                                           std::string inner_state,
                                           WrapFn&& wrap, TrainFn&& train_fn) {
  pred::PredictorTrainReport report;
  int done = 0;
  if (!inner_state.empty()) {
    done = json::parse(inner_state).at("step").get<int>();
  }
  const int interval = std::max(1, cfg.snapshot_interval);
  while (true) {
    nn::TrainConfig chunk = tc;
    chunk.total_steps = std::min(done + interval, tc.total_steps);
    report = train_fn(chunk, inner_state, &inner_state);
    done = report.steps_run;
    {
      std::ofstream out(state_path);
      out << wrap(inner_state);
    }
    if (done >= tc.total_steps || done < chunk.total_steps) break;
  }
  return report;
}

std::string identity_wrap(const std::string& inner) { return inner; }

}  // namespace

int cmd_train(const ProjectConfig& cfg, const std::string& target_str,
              bool resume) {
  fs::create_directories(cfg.artifacts_dir);
  const TrainTarget target = parse_target(target_str);
  const auto train_ids = read_split_file(cfg.train_split);
  const auto test_ids = read_split_file(cfg.test_split);
  const std::string slug = target.slug();
  const std::string ckpt_path = cfg.artifact(slug + ".ckpt.json");
  const std::string loss_path = cfg.artifact(slug + "_loss.csv");
  const std::string state_path = cfg.artifact(slug + ".trainstate.json");

  if (target.ref_encoder) {
    std::vector<vq::RefTrainSample> dataset;
    std::vector<std::string> inputs;
    for (const auto& id : train_ids) {
      const auto u = load_utterance(cfg, id);
      const auto spec = stft(u.audio, cfg.frames);
      dataset.push_back({mel_spectrogram(spec, cfg.mel),
                         u.alignment.durations(cfg.vq_level)});
      inputs.push_back(cfg.wav_path(id));
      inputs.push_back(cfg.alignment_path(id));
    }
    nn::TrainConfig tc = cfg.train_ref;
    const auto trained =
        vq::train_reference_encoder(dataset, cfg.ref_encoder, tc);
    if (trained.report.collapse_warning) {
      std::cerr << "warning: codebook perplexity below 2; the codebook has "
                   "collapsed\n";
    }

    json sections;
    sections["encoder"] = trained.encoder->to_json(false);
    sections["codebook"] = trained.codebook.to_json(false);
    sections["decoder"] = trained.decoder->to_json(false);
    json meta;
    meta["target"] = slug;
    meta["level"] = to_string(cfg.vq_level);
    meta["config_hash"] = cfg.config_hash;
    meta["seed"] = tc.rng_seed;
    meta["step0_loss"] = trained.report.step0_loss;
    meta["final_loss"] = trained.report.final_loss;
    meta["perplexity_per_epoch"] = trained.report.perplexity_per_epoch;
    meta["collapse_warning"] = trained.report.collapse_warning;
    nn::save_checkpoint(ckpt_path, nn::make_checkpoint(sections, meta));

    std::ofstream out(loss_path);
    out << "step,total,reconstruction,codebook,commitment\n";
    out.precision(17);
    for (const auto& p : trained.report.curve) {
      out << p.step << "," << p.total << "," << p.reconstruction << ","
          << p.codebook << "," << p.commitment << "\n";
    }
    out.close();
    write_manifests("train", cfg.config_hash, inputs, {ckpt_path, loss_path});
    return 0;
  }

  // predictor targets
  const bool want_word = target.arch != TrainTarget::Arch::phoneme;
  const bool want_phoneme = target.arch != TrainTarget::Arch::word;
  const bool needs_rule =
      (want_word && target.word_kind == LabelKind::rule_based) ||
      (want_phoneme && target.phoneme_kind == LabelKind::rule_based);
  const bool needs_codebook =
      (want_word && target.word_kind == LabelKind::neural_based) ||
      (want_phoneme && target.phoneme_kind == LabelKind::neural_based);

  std::optional<RuleQuantizers> quantizers;
  if (needs_rule) quantizers = load_quantizers(cfg);
  std::optional<vq::Codebook> codebook;
  std::vector<std::string> extra_inputs;
  if (needs_codebook) {
    codebook = load_ref_encoder(cfg).codebook;
    extra_inputs.push_back(cfg.artifact("ref_encoder.ckpt.json"));
  }
  if (needs_rule) {
    extra_inputs.push_back(cfg.artifact("quantizer_f0.json"));
    extra_inputs.push_back(cfg.artifact("quantizer_energy.json"));
  }

  std::optional<pred::WordEmbeddings> embeddings;
  if (want_word) {
    if (cfg.embeddings.empty()) {
      throw ConfigError("word-level targets need paths.embeddings");
    }
    embeddings = pred::read_embedding_file(cfg.embeddings);
    extra_inputs.push_back(cfg.embeddings);
  }

  const auto symbols =
      want_phoneme ? collect_symbols(cfg, train_ids) : std::vector<std::string>{};

  auto bundle = build_samples(
      cfg, train_ids, "train", want_word, target.word_kind, want_phoneme,
      target.phoneme_kind, embeddings ? &*embeddings : nullptr, nullptr,
      &symbols, quantizers ? &*quantizers : nullptr,
      codebook ? &*codebook : nullptr);
  auto test_bundle = build_samples(
      cfg, test_ids, "test", want_word, target.word_kind, want_phoneme,
      target.phoneme_kind, embeddings ? &*embeddings : nullptr, nullptr,
      &symbols, quantizers ? &*quantizers : nullptr,
      codebook ? &*codebook : nullptr);

  std::vector<std::string> inputs = bundle.inputs;
  inputs.insert(inputs.end(), test_bundle.inputs.begin(),
                test_bundle.inputs.end());
  inputs.insert(inputs.end(), extra_inputs.begin(), extra_inputs.end());

  std::string prior_state;
  if (resume && fs::exists(state_path)) {
    std::ifstream in(state_path);
    std::stringstream ss;
    ss << in.rdbuf();
    prior_state = ss.str();
  }

  const std::uint64_t seed = slug_seed(cfg, slug);
  json sections, meta;
  meta["target"] = slug;
  meta["config_hash"] = cfg.config_hash;
  meta["seed"] = seed;
  meta["oov_words"] = bundle.oov_words;
  if (embeddings) meta["embeddings_path"] = cfg.embeddings;

  const int out_dim_word =
      target.word_kind == LabelKind::rule_based ? 2 : 3;
  const int out_dim_phoneme =
      target.phoneme_kind == LabelKind::rule_based ? 2 : 3;
  pred::PredictorConfig word_cfg;
  word_cfg.input_dim = embeddings ? embeddings->dim : 1;
  word_cfg.conv_channels = cfg.predictor_channels;
  word_cfg.kernel = cfg.predictor_kernel;
  word_cfg.dropout = cfg.predictor_dropout;
  word_cfg.output_dim = out_dim_word;
  pred::PredictorConfig phoneme_cfg;
  phoneme_cfg.input_dim = cfg.phoneme_feature_dim;
  phoneme_cfg.conv_channels = cfg.predictor_channels;
  phoneme_cfg.kernel = cfg.predictor_kernel;
  phoneme_cfg.dropout = cfg.predictor_dropout;
  phoneme_cfg.output_dim = out_dim_phoneme;

  pred::PredictorTrainReport report;

  if (target.arch == TrainTarget::Arch::word) {
    pred::WordPredictor model(target.word_kind, word_cfg, seed);
    nn::TrainConfig tc = cfg.train_word;
    report = train_in_chunks(
        cfg, tc, state_path, prior_state, identity_wrap,
        [&](const nn::TrainConfig& chunk, const std::string& st,
            std::string* out) {
          return model.train(bundle.samples, chunk, st, out);
        });
    // discretized evaluation over the held-out split
    std::vector<Tensor> discretized;
    std::vector<const pred::TokenTargets*> gt;
    for (const auto& s : test_bundle.samples) {
      discretized.push_back(discretize_continuous(
          model.predict(s.word_features), target.word_kind,
          quantizers ? &*quantizers : nullptr,
          codebook ? &*codebook : nullptr));
      gt.push_back(&s.word);
    }
    meta["eval"] = eval_against_targets(discretized, gt).to_json(target.word_kind);
    sections["word_predictor"] = model.to_json(false);
  } else if (target.arch == TrainTarget::Arch::phoneme) {
    pred::PhonemePredictor model(target.phoneme_kind, phoneme_cfg, symbols,
                                 seed);
    nn::TrainConfig tc = cfg.train_phoneme;
    report = train_in_chunks(
        cfg, tc, state_path, prior_state, identity_wrap,
        [&](const nn::TrainConfig& chunk, const std::string& st,
            std::string* out) {
          return model.train(bundle.samples, chunk, st, out);
        });
    std::vector<Tensor> discretized;
    std::vector<const pred::TokenTargets*> gt;
    for (const auto& s : test_bundle.samples) {
      discretized.push_back(discretize_continuous(
          model.predict(s.phoneme_ids), target.phoneme_kind,
          quantizers ? &*quantizers : nullptr,
          codebook ? &*codebook : nullptr));
      gt.push_back(&s.phoneme);
    }
    meta["eval"] = eval_against_targets(discretized, gt).to_json(target.phoneme_kind);
    sections["phoneme_predictor"] = model.to_json(false);
  } else {
    pred::HierarchicalPredictor model(target.word_kind, target.phoneme_kind,
                                      word_cfg, phoneme_cfg, symbols,
                                      cfg.n_bins, seed,
                                      cfg.hier_embed_discrete);
    model.set_word_discretizers(
        target.word_kind == LabelKind::rule_based ? quantizers : std::nullopt,
        target.word_kind == LabelKind::neural_based ? codebook : std::nullopt);

    std::string word_inner, phoneme_inner;
    bool word_done = false;
    if (!prior_state.empty()) {
      const json st = json::parse(prior_state);
      if (st.value("stage", "") == "word") {
        word_inner = st.value("inner", "");
      } else if (st.value("stage", "") == "phoneme") {
        word_done = true;
        phoneme_inner = st.value("inner", "");
        auto restored = pred::WordPredictor::from_json(st.at("word_model"));
        model.word() = std::move(restored);
      }
    }

    pred::PredictorTrainReport word_report;
    if (!word_done) {
      nn::TrainConfig tc = cfg.train_word;
      word_report = train_in_chunks(
          cfg, tc, state_path, word_inner,
          [](const std::string& inner) {
            return json{{"stage", "word"}, {"inner", inner}}.dump();
          },
          [&](const nn::TrainConfig& chunk, const std::string& st,
              std::string* out) {
            return model.word().train(bundle.samples, chunk, st, out);
          });
      meta["word_stage"] = {{"loss_kind", word_report.loss_kind},
                            {"step0_loss", word_report.step0_loss},
                            {"final_loss", word_report.final_loss},
                            {"steps_run", word_report.steps_run}};
    }

    nn::TrainConfig tc = cfg.train_phoneme;
    const json frozen_word = model.word().to_json(true);
    report = train_in_chunks(
        cfg, tc, state_path, phoneme_inner,
        [&frozen_word](const std::string& inner) {
          return json{{"stage", "phoneme"},
                      {"inner", inner},
                      {"word_model", frozen_word}}
              .dump();
        },
        [&](const nn::TrainConfig& chunk, const std::string& st,
            std::string* out) {
          return model.train_phoneme(bundle.samples, chunk,
                                     cfg.hier_teacher_force, st, out);
        });

    std::vector<Tensor> discretized;
    std::vector<const pred::TokenTargets*> gt;
    for (const auto& s : test_bundle.samples) {
      const auto out =
          model.predict(s.word_features, s.phoneme_ids, s.phones_per_word);
      discretized.push_back(discretize_continuous(
          out.phoneme, target.phoneme_kind,
          quantizers ? &*quantizers : nullptr,
          codebook ? &*codebook : nullptr));
      gt.push_back(&s.phoneme);
    }
    meta["eval"] = eval_against_targets(discretized, gt).to_json(target.phoneme_kind);
    sections["hierarchical"] = model.to_json(false);
  }

  // the inner driver state carries a wrapped JSON for H targets; the loss
  // kind and losses always come from the last stage trained
  meta["loss_kind"] = report.loss_kind;
  meta["step0_loss"] = report.step0_loss;
  meta["final_loss"] = report.final_loss;
  meta["steps_run"] = report.steps_run;

  nn::save_checkpoint(ckpt_path, nn::make_checkpoint(sections, meta));
  write_loss_csv(loss_path, report);
  write_manifests("train", cfg.config_hash, inputs, {ckpt_path, loss_path});
  return 0;
}

int cmd_predict(const ProjectConfig& cfg, const std::string& checkpoint_path,
                const std::string& split) {
  fs::create_directories(cfg.artifacts_dir);
  const json ckpt = nn::load_checkpoint(checkpoint_path);
  const json& sections = ckpt.at("sections");
  const json& meta = ckpt.at("meta");
  const std::string slug = meta.value("target", "predictor");

  std::vector<std::string> ids;
  std::string split_name = split;
  if (split == "train") {
    ids = read_split_file(cfg.train_split);
  } else if (split == "test") {
    ids = read_split_file(cfg.test_split);
  } else {
    ids = read_split_file(split);  // explicit id list file
    split_name = fs::path(split).stem().string();
  }

  std::optional<pred::WordEmbeddings> embeddings;
  long oov = 0;
  auto word_features_of = [&](const UtteranceAlignment& ali) {
    if (!embeddings) {
      if (cfg.embeddings.empty()) {
        throw ConfigError("word-level prediction needs paths.embeddings");
      }
      embeddings = pred::read_embedding_file(cfg.embeddings);
    }
    Tensor f({static_cast<int>(ali.words.size()), embeddings->dim});
    for (std::size_t w = 0; w < ali.words.size(); ++w) {
      const auto vec = embeddings->lookup(ali.words[w].text, &oov);
      for (int d = 0; d < embeddings->dim; ++d) {
        f.at(static_cast<int>(w), d) = vec[d];
      }
    }
    return f;
  };

  std::vector<ProsodyLabelSet> out_word, out_phoneme;
  std::vector<std::string> outputs;
  std::vector<std::string> discretizer_inputs;

  auto discretizers_for = [&](LabelKind kind)
      -> std::pair<std::optional<RuleQuantizers>, std::optional<vq::Codebook>> {
    if (kind == LabelKind::rule_based) {
      discretizer_inputs.push_back(cfg.artifact("quantizer_f0.json"));
      discretizer_inputs.push_back(cfg.artifact("quantizer_energy.json"));
      return {load_quantizers(cfg), {}};
    }
    discretizer_inputs.push_back(cfg.artifact("ref_encoder.ckpt.json"));
    return {{}, load_ref_encoder(cfg).codebook};
  };

  if (sections.contains("word_predictor")) {
    auto model =
        pred::WordPredictor::from_json(sections.at("word_predictor"));
    const auto [rq, cb] = discretizers_for(model.kind());
    for (const auto& id : ids) {
      const auto ali = parse_alignment_file_text_only(
          cfg.alignment_path(id), cfg.sample_rate, cfg.frames.hop_length);
      const Tensor y = model.predict(word_features_of(ali));
      out_word.push_back(pred::labels_from_prediction(
          y, model.kind(), TokenLevel::word, id, rq ? &*rq : nullptr,
          cb ? &*cb : nullptr));
    }
  } else if (sections.contains("phoneme_predictor")) {
    auto model =
        pred::PhonemePredictor::from_json(sections.at("phoneme_predictor"));
    const auto [rq, cb] = discretizers_for(model.kind());
    for (const auto& id : ids) {
      const auto ali = parse_alignment_file_text_only(
          cfg.alignment_path(id), cfg.sample_rate, cfg.frames.hop_length);
      std::vector<int> phoneme_ids;
      for (const auto& p : ali.phonemes) {
        phoneme_ids.push_back(model.symbol_id(p.symbol));
      }
      const Tensor y = model.predict(phoneme_ids);
      out_phoneme.push_back(pred::labels_from_prediction(
          y, model.kind(), TokenLevel::phoneme, id, rq ? &*rq : nullptr,
          cb ? &*cb : nullptr));
    }
  } else if (sections.contains("hierarchical")) {
    auto model =
        pred::HierarchicalPredictor::from_json(sections.at("hierarchical"));
    const auto [w_rq, w_cb] = discretizers_for(model.word_kind());
    const auto [p_rq, p_cb] = discretizers_for(model.phoneme_kind());
    for (const auto& id : ids) {
      const auto ali = parse_alignment_file_text_only(
          cfg.alignment_path(id), cfg.sample_rate, cfg.frames.hop_length);
      std::vector<int> phoneme_ids;
      for (const auto& p : ali.phonemes) {
        phoneme_ids.push_back(model.phoneme().symbol_id(p.symbol));
      }
      const auto out = model.predict(word_features_of(ali), phoneme_ids,
                                     ali.phonemes_per_word());
      out_word.push_back(pred::labels_from_prediction(
          out.word, model.word_kind(), TokenLevel::word, id,
          w_rq ? &*w_rq : nullptr, w_cb ? &*w_cb : nullptr));
      out_phoneme.push_back(pred::labels_from_prediction(
          out.phoneme, model.phoneme_kind(), TokenLevel::phoneme, id,
          p_rq ? &*p_rq : nullptr, p_cb ? &*p_cb : nullptr));
    }
  } else {
    throw DataError("checkpoint has no predictor section: " + checkpoint_path);
  }

  if (!out_word.empty() || sections.contains("word_predictor") ||
      sections.contains("hierarchical")) {
    const std::string path =
        cfg.artifact("predictions_" + slug + "_word_" + split_name + ".jsonl");
    write_label_file(path, out_word);
    outputs.push_back(path);
  }
  if (!out_phoneme.empty() || sections.contains("phoneme_predictor") ||
      sections.contains("hierarchical")) {
    const std::string path = cfg.artifact("predictions_" + slug +
                                          "_phoneme_" + split_name + ".jsonl");
    write_label_file(path, out_phoneme);
    outputs.push_back(path);
  }

  json run_meta;
  run_meta["command"] = "predict";
  run_meta["checkpoint"] = checkpoint_path;
  run_meta["checkpoint_sha256"] = sha256_file(checkpoint_path);
  run_meta["config_hash"] = cfg.config_hash;
  run_meta["target"] = slug;
  run_meta["split"] = split_name;
  run_meta["utterances"] = ids.size();
  run_meta["oov_words"] = oov;
  const std::string meta_path =
      cfg.artifact("predictions_" + slug + "_" + split_name + "_meta.json");
  {
    std::ofstream out(meta_path);
    out << run_meta.dump(2) << "\n";
  }
  outputs.push_back(meta_path);

  std::vector<std::string> inputs{checkpoint_path};
  inputs.insert(inputs.end(), discretizer_inputs.begin(),
                discretizer_inputs.end());
  for (const auto& id : ids) inputs.push_back(cfg.alignment_path(id));
  if (embeddings) inputs.push_back(cfg.embeddings);
  write_manifests("predict", cfg.config_hash, inputs, outputs);
  return 0;
}

int cmd_evaluate(const ProjectConfig& cfg, const std::string& pairs_csv) {
  fs::create_directories(cfg.artifacts_dir);
  std::ifstream in(pairs_csv);
  if (!in) throw DataError("cannot open pair manifest: " + pairs_csv);

  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  const fs::path base = fs::path(pairs_csv).parent_path();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "test_path,reference_path") continue;  // optional header
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("pair manifest line needs 'test_path,reference_path': " +
                      line);
    }
    auto resolve = [&](std::string p) {
      while (!p.empty() && p.back() == '\r') p.pop_back();
      return fs::path(p).is_absolute() ? p : (base / p).string();
    };
    pairs.emplace_back(resolve(line.substr(0, comma)),
                       resolve(line.substr(comma + 1)));
  }

  auto analyze = [&](const std::string& path) {
    const AudioBuffer audio = read_wav(path);
    if (audio.sample_rate != cfg.sample_rate) {
      throw DataError("sample rate mismatch in " + path);
    }
    const auto spec = stft(audio, cfg.frames);
    auto track = estimate_f0(audio, cfg.frames, cfg.pitch);
    track.energy = frame_energy(spec);
    return std::make_pair(mel_spectrogram(spec, cfg.mel), std::move(track));
  };

  std::vector<metrics::MetricReport> reports;
  std::vector<std::string> rows;
  long failed = 0;
  for (const auto& [test_path, ref_path] : pairs) {
    try {
      const auto [mel_ref, track_ref] = analyze(ref_path);
      const auto [mel_test, track_test] = analyze(test_path);
      const auto path = metrics::dtw_align(mel_ref, mel_test);
      const auto aligned =
          metrics::apply_alignment(path, track_ref, track_test);
      const auto report =
          metrics::evaluate_pair(aligned, cfg.gpe_threshold);
      reports.push_back(report);
      rows.push_back(metrics::report_csv_row(test_path, report));
    } catch (const DataError& e) {
      ++failed;
      rows.push_back(test_path + ",,,,,,error:" + e.what());
    }
  }

  const std::string csv_path = cfg.artifact("metrics.csv");
  {
    std::ofstream out(csv_path);
    out << metrics::report_csv_header() << "\n";
    for (const auto& row : rows) out << row << "\n";
  }
  const auto summary = metrics::summarize(reports, failed);
  json summary_json = summary.to_json();
  summary_json["schema_version"] = 1;
  summary_json["config_hash"] = cfg.config_hash;
  summary_json["gpe_threshold"] = cfg.gpe_threshold;
  const std::string summary_path = cfg.artifact("metrics_summary.json");
  {
    std::ofstream out(summary_path);
    out << summary_json.dump(2) << "\n";
  }

  std::vector<std::string> inputs{pairs_csv};
  for (const auto& [a, b] : pairs) {
    if (fs::exists(a)) inputs.push_back(a);
    if (fs::exists(b)) inputs.push_back(b);
  }
  write_manifests("evaluate", cfg.config_hash, inputs,
                  {csv_path, summary_path});
  return failed > 0 ? 2 : 0;
}

int cmd_report_predictability(const ProjectConfig& cfg,
                              const std::vector<std::string>& sources) {
  if (sources.empty()) {
    throw ConfigError("predictability report needs at least one "
                      "--source name=checkpoint entry");
  }
  fs::create_directories(cfg.artifacts_dir);
  const auto test_ids = read_split_file(cfg.test_split);
  const auto quantizers = load_quantizers(cfg);

  std::vector<std::string> rows, inputs;
  for (const auto& source : sources) {
    const auto eq = source.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("source must look like name=checkpoint: " + source);
    }
    const std::string name = source.substr(0, eq);
    const std::string ckpt_path = source.substr(eq + 1);
    if (!fs::exists(ckpt_path)) {
      throw DataError("missing predictor checkpoint for source '" + name +
                      "': " + ckpt_path);
    }
    inputs.push_back(ckpt_path);
    const json ckpt = nn::load_checkpoint(ckpt_path);
    const json& sections = ckpt.at("sections");

    EvalMae eval;
    if (sections.contains("word_predictor")) {
      auto model =
          pred::WordPredictor::from_json(sections.at("word_predictor"));
      if (model.kind() != LabelKind::rule_based) {
        throw ConfigError("source '" + name +
                          "' is not a rule-based predictor; the "
                          "predictability report compares F0/energy MAE");
      }
      auto embeddings = pred::read_embedding_file(cfg.embeddings);
      auto bundle = build_samples(cfg, test_ids, "test", true,
                                  LabelKind::rule_based, false,
                                  LabelKind::rule_based, &embeddings, nullptr,
                                  nullptr, &quantizers, nullptr);
      std::vector<Tensor> discretized;
      std::vector<const pred::TokenTargets*> gt;
      for (const auto& s : bundle.samples) {
        discretized.push_back(
            discretize_continuous(model.predict(s.word_features),
                                  LabelKind::rule_based, &quantizers, nullptr));
        gt.push_back(&s.word);
      }
      eval = eval_against_targets(discretized, gt);
    } else if (sections.contains("phoneme_predictor")) {
      auto model =
          pred::PhonemePredictor::from_json(sections.at("phoneme_predictor"));
      if (model.kind() != LabelKind::rule_based) {
        throw ConfigError("source '" + name +
                          "' is not a rule-based predictor; the "
                          "predictability report compares F0/energy MAE");
      }
      auto bundle = build_samples(cfg, test_ids, "test", false,
                                  LabelKind::rule_based, true,
                                  LabelKind::rule_based, nullptr, &model,
                                  nullptr, &quantizers, nullptr);
      std::vector<Tensor> discretized;
      std::vector<const pred::TokenTargets*> gt;
      for (const auto& s : bundle.samples) {
        discretized.push_back(
            discretize_continuous(model.predict(s.phoneme_ids),
                                  LabelKind::rule_based, &quantizers, nullptr));
        gt.push_back(&s.phoneme);
      }
      eval = eval_against_targets(discretized, gt);
    } else {
      throw ConfigError("source '" + name +
                        "' must point at a P+R or W+R predictor checkpoint");
    }
    std::ostringstream row;
    row.precision(10);
    row << name << "," << eval.per_channel[0] << "," << eval.per_channel[1];
    rows.push_back(row.str());
  }

  const std::string csv_path = cfg.artifact("predictability.csv");
  {
    std::ofstream out(csv_path);
    out << "source,f0_mae,energy_mae\n";
    for (const auto& row : rows) out << row << "\n";
  }
  write_manifests("report-predictability", cfg.config_hash, inputs,
                  {csv_path});
  return 0;
}

int cmd_verify(const ProjectConfig& cfg) {
  const auto result = verify_tree(cfg.artifacts_dir);
  std::cout << "checked " << result.artifacts_checked << " artifacts\n";
  for (const auto& failure : result.failures) {
    std::cout << "FAIL " << failure << "\n";
  }
  if (result.ok()) {
    std::cout << "provenance chain OK\n";
    return 0;
  }
  return 2;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"prosody modeling toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "project config JSON")
        ->required();
    cmd->add_option("--set", overrides,
                    "config override, dotted.key=json-value");
  };

  std::string kind_str = "rule", level_str = "phoneme";
  auto* extract = app.add_subcommand("extract", "extract prosody labels");
  add_common(extract);
  extract->add_option("--kind", kind_str, "rule|neural");
  extract->add_option("--level", level_str, "phoneme|word");

  std::string target;
  bool resume = false;
  auto* train = app.add_subcommand("train", "train a model target");
  add_common(train);
  train->add_option("--target", target, kTargetGrammar)->required();
  train->add_flag("--resume", resume, "resume from the last snapshot");

  std::string checkpoint, split = "test";
  auto* predict = app.add_subcommand("predict", "predict prosody labels");
  add_common(predict);
  predict->add_option("--checkpoint", checkpoint, "trained predictor")
      ->required();
  predict->add_option("--split", split, "train|test|<id-list file>");

  std::string pairs;
  auto* evaluate = app.add_subcommand("evaluate", "objective metric suite");
  add_common(evaluate);
  evaluate->add_option("--pairs", pairs, "CSV of test_path,reference_path")
      ->required();

  std::vector<std::string> sources;
  auto* predictability = app.add_subcommand(
      "report-predictability", "per-feature-source F0/energy MAE");
  add_common(predictability);
  predictability->add_option("--source", sources, "name=checkpoint");

  auto* verify = app.add_subcommand("verify", "verify artifact provenance");
  add_common(verify);

  std::vector<const char*> argv;
  argv.push_back("prosody");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()),
              const_cast<char**>(argv.data()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const ProjectConfig cfg = load_config(config_path, overrides);
    if (extract->parsed()) {
      return cmd_extract(cfg, label_kind_from_string(kind_str),
                         token_level_from_string(level_str));
    }
    if (train->parsed()) return cmd_train(cfg, target, resume);
    if (predict->parsed()) return cmd_predict(cfg, checkpoint, split);
    if (evaluate->parsed()) return cmd_evaluate(cfg, pairs);
    if (predictability->parsed()) {
      return cmd_report_predictability(cfg, sources);
    }
    if (verify->parsed()) return cmd_verify(cfg);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace prosody::cli
