#ifndef PROSODY_PREDICTOR_HPP_
#define PROSODY_PREDICTOR_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/labels.hpp"
#include "prosody/layers.hpp"
#include "prosody/optimizer.hpp"
#include "prosody/vq.hpp"

namespace prosody::pred {

// Repeats each word vector once per phoneme of that word:
// [words, dim] + counts -> [sum(counts), dim]. Zero counts are an error.
nn::Tensor length_regulate(const nn::Tensor& word_seq,
                           const std::vector<int>& phones_per_word);

// Trunk hyperparameters; the layer stack itself is fixed:
// 2 x [conv1d(kernel) -> relu -> layer_norm -> dropout] -> linear head.
struct PredictorConfig {
  int input_dim = 256;
  int conv_channels = 256;
  int kernel = 3;
  double dropout = 0.5;
  int output_dim = 2;  // 2 for rule-based (F0, energy), 3 for neural-based

  nlohmann::json to_json() const;
  static PredictorConfig from_json(const nlohmann::json& j);
};

// Per-channel affine normalization of regression targets. Fitted on the
// training targets; predictions are mapped back to the original domain.
struct TargetStats {
  std::vector<double> mean;
  std::vector<double> stdev;

  static TargetStats fit(const std::vector<nn::Tensor>& targets, int dim);
  void standardize(nn::Tensor& t) const;
  void destandardize(nn::Tensor& t) const;
  nlohmann::json to_json() const;
  static TargetStats from_json(const nlohmann::json& j);
};

// Continuous targets plus the discrete labels they came from.
struct TokenTargets {
  nn::Tensor continuous;        // [tokens, output_dim]
  std::vector<RuleLabel> rule;  // rule kind only
  std::vector<int> codewords;   // neural kind only
};

TokenTargets targets_from_labels(const ProsodyLabelSet& labels,
                                 const RuleQuantizers* quantizers,
                                 const vq::Codebook* codebook);

// One utterance of predictor training/eval data.
struct PredictorSample {
  std::string utterance_id;
  nn::Tensor word_features;          // [words, embedding_dim]
  std::vector<int> phoneme_ids;      // [phonemes], into the symbol table
  std::vector<int> phones_per_word;  // [words]
  TokenTargets word;
  TokenTargets phoneme;
};

struct PredictorTrainReport {
  std::string loss_kind;  // "mae" or "mse"
  std::vector<std::pair<int, double>> curve;
  double step0_loss = 0.0;
  double final_loss = 0.0;
  int steps_run = 0;
};

// Word-level predictor over external word embeddings.
class WordPredictor {
 public:
  WordPredictor(LabelKind kind, const PredictorConfig& cfg,
                std::uint64_t seed);

  // [words, output_dim] continuous predictions in the original domain.
  nn::Tensor predict(const nn::Tensor& word_features);

  PredictorTrainReport train(const std::vector<PredictorSample>& dataset,
                             const nn::TrainConfig& cfg,
                             const std::string& resume_state = "",
                             std::string* state_out = nullptr);

  LabelKind kind() const { return kind_; }
  const PredictorConfig& config() const { return cfg_; }
  nn::Network& net() { return *net_; }
  TargetStats& stats() { return stats_; }

  nlohmann::json to_json(bool full_precision) const;
  static WordPredictor from_json(const nlohmann::json& j);

 private:
  WordPredictor() = default;

  LabelKind kind_ = LabelKind::rule_based;
  PredictorConfig cfg_;
  std::unique_ptr<nn::Network> net_;
  TargetStats stats_;
};

// Phoneme-level predictor with a jointly trained per-symbol feature table.
class PhonemePredictor {
 public:
  PhonemePredictor(LabelKind kind, const PredictorConfig& cfg,
                   std::vector<std::string> symbols, std::uint64_t seed);

  nn::Tensor predict(const std::vector<int>& phoneme_ids);

  PredictorTrainReport train(const std::vector<PredictorSample>& dataset,
                             const nn::TrainConfig& cfg,
                             const std::string& resume_state = "",
                             std::string* state_out = nullptr);

  LabelKind kind() const { return kind_; }
  const PredictorConfig& config() const { return cfg_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  int symbol_id(const std::string& symbol) const;  // 0 (<unk>) when missing

  // Internals shared with the hierarchical wrapper.
  nn::Tensor forward(const std::vector<int>& ids, const nn::Tensor* inject,
                     nn::Mode mode);
  nn::Tensor backward_trunk(const nn::Tensor& grad_out);
  nn::Network& embed_net() { return *embed_; }
  nn::Network& trunk_net() { return *trunk_; }
  TargetStats& stats() { return stats_; }

  nlohmann::json to_json(bool full_precision) const;
  static PhonemePredictor from_json(const nlohmann::json& j);

 private:
  PhonemePredictor() = default;

  LabelKind kind_ = LabelKind::rule_based;
  PredictorConfig cfg_;
  std::vector<std::string> symbols_;  // index 0 is always "<unk>"
  std::unique_ptr<nn::Network> embed_;
  std::unique_ptr<nn::Network> trunk_;
  TargetStats stats_;
};

// Hierarchical predictor: the word stage's discretized prediction is mapped
// through learned label-embedding tables, expanded to phoneme length, summed
// onto the phoneme features, and fed to the phoneme stage.
class HierarchicalPredictor {
 public:
  // embed_discrete: the default injection discretizes the word prediction
  // and looks the label up in learned tables. When false, the continuous
  // word prediction is passed through a learned linear projection instead.
  HierarchicalPredictor(LabelKind word_kind, LabelKind phoneme_kind,
                        const PredictorConfig& word_cfg,
                        const PredictorConfig& phoneme_cfg,
                        std::vector<std::string> symbols, int n_bins,
                        std::uint64_t seed, bool embed_discrete = true);

  // Discretization assets of the word stage, captured at training time so
  // inference is self-contained.
  void set_word_discretizers(std::optional<RuleQuantizers> quantizers,
                             std::optional<vq::Codebook> codebook);

  struct Prediction {
    nn::Tensor word;     // [words, D_word] continuous
    nn::Tensor phoneme;  // [phonemes, D_phoneme] continuous
  };
  Prediction predict(const nn::Tensor& word_features,
                     const std::vector<int>& phoneme_ids,
                     const std::vector<int>& phones_per_word);

  // Stage 1: the word predictor trains exactly as the standalone one.
  PredictorTrainReport train_word(const std::vector<PredictorSample>& dataset,
                                  const nn::TrainConfig& cfg);
  // Stage 2: phoneme stage + label tables; the word stage stays frozen.
  // Teacher forcing uses ground-truth word labels from the dataset.
  PredictorTrainReport train_phoneme(
      const std::vector<PredictorSample>& dataset, const nn::TrainConfig& cfg,
      bool teacher_force = true, const std::string& resume_state = "",
      std::string* state_out = nullptr);

  WordPredictor& word() { return *word_; }
  PhonemePredictor& phoneme() { return *phoneme_; }
  LabelKind word_kind() const { return word_->kind(); }
  LabelKind phoneme_kind() const { return phoneme_->kind(); }
  // Zeroing these tables reduces the phoneme stage to the plain predictor.
  std::vector<nn::Layer*> label_table_layers();

  nlohmann::json to_json(bool full_precision) const;
  static HierarchicalPredictor from_json(const nlohmann::json& j);

 private:
  HierarchicalPredictor() = default;

  nn::Tensor embed_word_labels(const std::vector<RuleLabel>& rule,
                               const std::vector<int>& codewords,
                               nn::Mode mode);

  std::unique_ptr<WordPredictor> word_;
  std::unique_ptr<PhonemePredictor> phoneme_;
  // rule kind: one table per channel, summed; neural kind: codeword table
  std::unique_ptr<nn::Network> table_f0_;
  std::unique_ptr<nn::Network> table_energy_;
  std::unique_ptr<nn::Network> table_code_;
  // raw-continuous alternative: word prediction -> linear -> feature dim
  std::unique_ptr<nn::Network> projection_;
  bool embed_discrete_ = true;
  std::optional<RuleQuantizers> word_quantizers_;
  std::optional<vq::Codebook> word_codebook_;
  int n_bins_ = 256;
};

// Discretizes continuous predictions: rule channels through the fitted
// quantizers, neural latents snapped to the nearest codeword.
ProsodyLabelSet labels_from_prediction(const nn::Tensor& continuous,
                                       LabelKind kind, TokenLevel level,
                                       const std::string& utterance_id,
                                       const RuleQuantizers* quantizers,
                                       const vq::Codebook* codebook);

}  // namespace prosody::pred

#endif  // PROSODY_PREDICTOR_HPP_
