#ifndef PROSODY_PIPELINE_HPP_
#define PROSODY_PIPELINE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "prosody/config.hpp"
#include "prosody/labels.hpp"

namespace prosody::cli {

// Training target grammar:
//   ref-encoder
//   predictor:P+R | predictor:P+N | predictor:W+R | predictor:W+N
//   predictor:H(W+R,P+R) | predictor:H(W+R,P+N)
//   predictor:H(W+N,P+R) | predictor:H(W+N,P+N)
struct TrainTarget {
  bool ref_encoder = false;
  enum class Arch { phoneme, word, hierarchical } arch = Arch::phoneme;
  LabelKind word_kind = LabelKind::rule_based;
  LabelKind phoneme_kind = LabelKind::rule_based;

  std::string slug() const;  // filesystem-safe artifact prefix
};

// Throws ConfigError listing the grammar on an unknown target string.
TrainTarget parse_target(const std::string& target);

// Subcommand implementations; all return a process exit code.
int cmd_extract(const ProjectConfig& cfg, LabelKind kind, TokenLevel level);
int cmd_train(const ProjectConfig& cfg, const std::string& target,
              bool resume);
int cmd_predict(const ProjectConfig& cfg, const std::string& checkpoint_path,
                const std::string& split);
int cmd_evaluate(const ProjectConfig& cfg, const std::string& pairs_csv);
int cmd_report_predictability(const ProjectConfig& cfg,
                              const std::vector<std::string>& sources);
int cmd_verify(const ProjectConfig& cfg);

// Whole-CLI entry point used by the binary and by tests; maps errors to the
// exit-code contract (1 usage/config, 2 data, 3 numerical).
int run(const std::vector<std::string>& args);

}  // namespace prosody::cli

#endif  // PROSODY_PIPELINE_HPP_
