#ifndef PROSODY_LABELS_HPP_
#define PROSODY_LABELS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prosody/alignment.hpp"
#include "prosody/audio.hpp"
#include "prosody/pitch.hpp"
#include "prosody/quantizer.hpp"
#include "prosody/stft.hpp"

namespace prosody {

enum class LabelKind { rule_based, neural_based };

std::string to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& s);

// One real per token at one level (a single F0 or energy channel).
struct TokenValues {
  TokenLevel level = TokenLevel::phoneme;
  std::vector<double> values;
};

// Duration-weighted averaging of a frame series into token values. When
// voiced_mask is given (the F0 channel), only voiced frames contribute and a
// token without any voiced frame gets 0.
TokenValues token_average(const std::vector<double>& track,
                          const std::vector<std::uint8_t>* voiced_mask,
                          const UtteranceAlignment& alignment,
                          TokenLevel level);

struct RuleLabel {
  int f0_bin = 0;
  int energy_bin = 0;
};

struct NeuralLabel {
  int codeword = 0;
  std::array<double, 3> latent{};
};

// Token-level prosody labels of one utterance.
struct ProsodyLabelSet {
  std::string utterance_id;
  LabelKind kind = LabelKind::rule_based;
  TokenLevel level = TokenLevel::phoneme;
  std::vector<RuleLabel> rule;      // used when kind == rule_based
  std::vector<NeuralLabel> neural;  // used when kind == neural_based

  int token_count() const {
    return kind == LabelKind::rule_based ? static_cast<int>(rule.size())
                                         : static_cast<int>(neural.size());
  }

  std::string to_json_line() const;
  static ProsodyLabelSet from_json_line(const std::string& line);
};

// Both fitted quantizers of the rule-based channel pair.
struct RuleQuantizers {
  Quantizer f0;
  Quantizer energy;
};

// F0/energy extraction -> token averaging -> 256-bin quantization.
ProsodyLabelSet extract_rule_labels(const AudioBuffer& audio,
                                    const UtteranceAlignment& alignment,
                                    TokenLevel level,
                                    const RuleQuantizers& quantizers,
                                    const FrameConfig& frames,
                                    const PitchConfig& pitch);

// Continuous (unquantized) token-level F0/energy channels, reused by both
// quantizer fitting and predictor target construction.
struct RuleChannels {
  TokenValues f0;
  TokenValues energy;
};

RuleChannels extract_rule_channels(const AudioBuffer& audio,
                                   const UtteranceAlignment& alignment,
                                   TokenLevel level, const FrameConfig& frames,
                                   const PitchConfig& pitch);

std::vector<ProsodyLabelSet> read_label_file(const std::string& path);
void write_label_file(const std::string& path,
                      const std::vector<ProsodyLabelSet>& sets);

}  // namespace prosody

#endif  // PROSODY_LABELS_HPP_
