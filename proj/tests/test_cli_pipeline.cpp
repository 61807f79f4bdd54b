#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "prosody/config.hpp"
#include "prosody/error.hpp"
#include "prosody/labels.hpp"
#include "prosody/pipeline.hpp"
#include "prosody/quantizer.hpp"
#include "support/toy_corpus.hpp"

using namespace prosody;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Corpus {
  testcorpus::ToyCorpus meta;
  std::string config;
  std::string artifacts;
};

// One shared corpus for the whole suite; regenerated from scratch per run.
const Corpus& corpus() {
  static Corpus c = [] {
    testcorpus::ToyCorpusSpec spec;
    spec.root = "cli_test_corpus";
    spec.n_train = 8;
    spec.n_test = 3;
    spec.n_word_types = 6;
    spec.seed = 77;
    fs::remove_all(spec.root);
    Corpus out;
    out.meta = testcorpus::generate(spec);
    out.config = out.meta.config_path;
    out.artifacts = spec.root + "/artifacts";
    return out;
  }();
  return c;
}

int run_cli(std::vector<std::string> args) { return cli::run(args); }

// fast predictor settings for pipeline tests
std::vector<std::string> fast_overrides() {
  return {"--set", "predictor.conv_channels=24",
          "--set", "predictor.phoneme_feature_dim=24",
          "--set", "train.word.total_steps=60",
          "--set", "train.word.early_stop_ratio=0",
          "--set", "train.phoneme.total_steps=60",
          "--set", "train.phoneme.early_stop_ratio=0",
          "--set", "train.ref_encoder.total_steps=160",
          "--set", "train.snapshot_interval=25",
          "--set", "vq.quant_warmup_steps=60",
          "--set", "vq.reseed_interval=60"};
}

std::vector<std::string> with_fast(std::vector<std::string> args) {
  auto extra = fast_overrides();
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("target grammar") {
  CHECK(cli::parse_target("ref-encoder").ref_encoder);
  const auto wr = cli::parse_target("predictor:W+R");
  CHECK(wr.arch == cli::TrainTarget::Arch::word);
  CHECK(wr.word_kind == LabelKind::rule_based);
  const auto pn = cli::parse_target("predictor:P+N");
  CHECK(pn.arch == cli::TrainTarget::Arch::phoneme);
  CHECK(pn.phoneme_kind == LabelKind::neural_based);
  const auto h = cli::parse_target("predictor:H(W+R,P+N)");
  CHECK(h.arch == cli::TrainTarget::Arch::hierarchical);
  CHECK(h.word_kind == LabelKind::rule_based);
  CHECK(h.phoneme_kind == LabelKind::neural_based);
  CHECK(h.slug() == "predictor_H_W_R_P_N");
  CHECK_THROWS_AS(cli::parse_target("predictor:X+R"), ConfigError);
  CHECK_THROWS_AS(cli::parse_target("predictor:H(P+R,W+N)"), ConfigError);
}

TEST_CASE("default word recipe follows the constant-rate setting") {
  const auto cfg = cli::load_config(corpus().config);
  // word predictor trains separately at a constant 1e-4 unless overridden;
  // the toy config overrides the rate but keeps the schedule
  CHECK(cfg.train_word.schedule == nn::LrSchedule::constant);
  const auto defaults = cli::load_config(corpus().config,
                                         {"train.word={}"});
  CHECK(defaults.train_word.schedule == nn::LrSchedule::constant);
  CHECK(defaults.train_word.learning_rate == 1e-4);
}

TEST_CASE("extract rule labels: per-word lines, deterministic bytes") {
  const auto& c = corpus();
  REQUIRE(run_cli({"extract", "--config", c.config, "--kind", "rule",
                   "--level", "word"}) == 0);
  const std::string path = c.artifacts + "/labels_rule_word_train.jsonl";
  const auto sets = read_label_file(path);
  CHECK(sets.size() == 8);
  for (const auto& set : sets) {
    CHECK(set.kind == LabelKind::rule_based);
    CHECK(set.level == TokenLevel::word);
    for (const auto& r : set.rule) {
      CHECK(r.f0_bin >= 0);
      CHECK(r.f0_bin <= 255);
      CHECK(r.energy_bin >= 0);
      CHECK(r.energy_bin <= 255);
    }
  }
  const std::string first = slurp(path);
  const std::string q_first = slurp(c.artifacts + "/quantizer_f0.json");

  REQUIRE(run_cli({"extract", "--config", c.config, "--kind", "rule",
                   "--level", "word"}) == 0);
  CHECK(slurp(path) == first);  // byte-identical rerun
  CHECK(slurp(c.artifacts + "/quantizer_f0.json") == q_first);

  REQUIRE(run_cli({"extract", "--config", c.config, "--kind", "rule",
                   "--level", "phoneme"}) == 0);
  CHECK(fs::exists(c.artifacts + "/labels_rule_phoneme_train.jsonl"));
  CHECK(fs::exists(c.artifacts + "/labels_rule_phoneme_test.jsonl"));
}

TEST_CASE("neural extraction without a codebook checkpoint is actionable") {
  const auto& c = corpus();
  fs::remove(c.artifacts + "/ref_encoder.ckpt.json");
  CHECK(run_cli({"extract", "--config", c.config, "--kind", "neural",
                 "--level", "phoneme"}) == 2);
}

TEST_CASE("train ref encoder, extract neural labels") {
  const auto& c = corpus();
  REQUIRE(run_cli(with_fast({"train", "--config", c.config, "--target",
                             "ref-encoder"})) == 0);
  REQUIRE(fs::exists(c.artifacts + "/ref_encoder.ckpt.json"));
  REQUIRE(run_cli(with_fast({"extract", "--config", c.config, "--kind",
                             "neural", "--level", "phoneme"})) == 0);
  REQUIRE(run_cli(with_fast({"extract", "--config", c.config, "--kind",
                             "neural", "--level", "word"})) == 0);
  const auto sets =
      read_label_file(c.artifacts + "/labels_neural_phoneme_train.jsonl");
  CHECK(sets.size() == 8);
  for (const auto& set : sets) {
    CHECK(set.kind == LabelKind::neural_based);
    for (const auto& n : set.neural) {
      CHECK(n.codeword >= 0);
      CHECK(n.codeword < 48);
    }
  }
}

TEST_CASE("train W+R records MAE and the H target is two-stage") {
  const auto& c = corpus();
  REQUIRE(run_cli(with_fast({"train", "--config", c.config, "--target",
                             "predictor:W+R"})) == 0);
  const json ckpt =
      json::parse(slurp(c.artifacts + "/predictor_W_R.ckpt.json"));
  CHECK(ckpt["meta"]["loss_kind"] == "mae");
  CHECK(ckpt["sections"].contains("word_predictor"));
  CHECK(fs::exists(c.artifacts + "/predictor_W_R_loss.csv"));

  REQUIRE(run_cli(with_fast({"train", "--config", c.config, "--target",
                             "predictor:H(W+R,P+N)"})) == 0);
  const json h =
      json::parse(slurp(c.artifacts + "/predictor_H_W_R_P_N.ckpt.json"));
  CHECK(h["sections"].contains("hierarchical"));
  CHECK(h["sections"]["hierarchical"].contains("word"));
  CHECK(h["sections"]["hierarchical"].contains("phoneme"));
  CHECK(h["meta"]["loss_kind"] == "mse");      // phoneme stage is neural
  CHECK(h["meta"]["word_stage"]["loss_kind"] == "mae");
}

TEST_CASE("unknown target is a usage error with the grammar") {
  const auto& c = corpus();
  CHECK(run_cli({"train", "--config", c.config, "--target",
                 "predictor:Q+R"}) == 1);
}

TEST_CASE("interrupted training resumes with an identical trajectory") {
  const auto& c = corpus();
  for (const std::string dir : {"artifacts_full", "artifacts_resume"}) {
    REQUIRE(run_cli({"extract", "--config", c.config, "--kind", "rule",
                     "--level", "phoneme", "--set",
                     "paths.artifacts_dir=" + dir}) == 0);
  }
  // fresh uninterrupted run in a separate artifact dir
  auto args_full = with_fast({"train", "--config", c.config, "--target",
                              "predictor:P+R"});
  args_full.push_back("--set");
  args_full.push_back("paths.artifacts_dir=artifacts_full");
  REQUIRE(run_cli(args_full) == 0);

  // same run capped at 25 steps (one snapshot), then resumed to 60
  auto args_part = with_fast({"train", "--config", c.config, "--target",
                              "predictor:P+R"});
  args_part.push_back("--set");
  args_part.push_back("paths.artifacts_dir=artifacts_resume");
  auto capped = args_part;
  capped.push_back("--set");
  capped.push_back("train.phoneme.total_steps=25");
  REQUIRE(run_cli(capped) == 0);
  auto resumed = args_part;
  resumed.push_back("--resume");
  REQUIRE(run_cli(resumed) == 0);

  CHECK(slurp("cli_test_corpus/artifacts_full/predictor_P_R_loss.csv") ==
        slurp("cli_test_corpus/artifacts_resume/predictor_P_R_loss.csv"));
}

TEST_CASE("predict emits both levels for hierarchical checkpoints") {
  const auto& c = corpus();
  REQUIRE(run_cli(with_fast({"predict", "--config", c.config, "--checkpoint",
                             c.artifacts + "/predictor_H_W_R_P_N.ckpt.json",
                             "--split", "test"})) == 0);
  const auto word_preds = read_label_file(
      c.artifacts + "/predictions_predictor_H_W_R_P_N_word_test.jsonl");
  const auto phoneme_preds = read_label_file(
      c.artifacts + "/predictions_predictor_H_W_R_P_N_phoneme_test.jsonl");
  CHECK(word_preds.size() == 3);
  CHECK(phoneme_preds.size() == 3);
  CHECK(word_preds[0].kind == LabelKind::rule_based);
  CHECK(phoneme_preds[0].kind == LabelKind::neural_based);
}

TEST_CASE("predicted labels reproduce the training report's eval number") {
  const auto& c = corpus();
  REQUIRE(run_cli(with_fast({"predict", "--config", c.config, "--checkpoint",
                             c.artifacts + "/predictor_W_R.ckpt.json",
                             "--split", "test"})) == 0);
  const json ckpt =
      json::parse(slurp(c.artifacts + "/predictor_W_R.ckpt.json"));
  const double reported = ckpt["meta"]["eval"]["combined"].get<double>();

  // recompute from the dumped files: dequantized predictions vs ground truth
  const auto preds = read_label_file(
      c.artifacts + "/predictions_predictor_W_R_word_test.jsonl");
  const auto truth =
      read_label_file(c.artifacts + "/labels_rule_word_test.jsonl");
  const Quantizer qf = Quantizer::load(c.artifacts + "/quantizer_f0.json");
  const Quantizer qe = Quantizer::load(c.artifacts + "/quantizer_energy.json");
  REQUIRE(preds.size() == truth.size());
  double mae_f0 = 0.0, mae_e = 0.0;
  long tokens = 0;
  for (std::size_t u = 0; u < preds.size(); ++u) {
    REQUIRE(preds[u].utterance_id == truth[u].utterance_id);
    REQUIRE(preds[u].rule.size() == truth[u].rule.size());
    for (std::size_t t = 0; t < preds[u].rule.size(); ++t) {
      mae_f0 += std::abs(qf.dequantize(preds[u].rule[t].f0_bin) -
                         qf.dequantize(truth[u].rule[t].f0_bin));
      mae_e += std::abs(qe.dequantize(preds[u].rule[t].energy_bin) -
                        qe.dequantize(truth[u].rule[t].energy_bin));
      ++tokens;
    }
  }
  const double recomputed = (mae_f0 / tokens + mae_e / tokens) / 2.0;
  CHECK(recomputed == doctest::Approx(reported).epsilon(1e-9));
}

TEST_CASE("empty utterance list produces empty outputs and exit 0") {
  const auto& c = corpus();
  std::ofstream empty("cli_test_corpus/empty_ids.txt");
  empty.close();
  REQUIRE(run_cli(with_fast({"predict", "--config", c.config, "--checkpoint",
                             c.artifacts + "/predictor_W_R.ckpt.json",
                             "--split", "cli_test_corpus/empty_ids.txt"})) == 0);
  CHECK(read_label_file(c.artifacts +
                        "/predictions_predictor_W_R_word_empty_ids.jsonl")
            .empty());
}

TEST_CASE("evaluate: self-comparison zeros and hand-averaged summary") {
  const auto& c = corpus();
  const std::string wav_a = "wavs/" + c.meta.train_ids[0] + ".wav";
  const std::string wav_b = "wavs/" + c.meta.train_ids[1] + ".wav";
  {
    std::ofstream pairs("cli_test_corpus/pairs.csv");
    pairs << "test_path,reference_path\n";
    pairs << wav_a << "," << wav_a << "\n";
    pairs << wav_b << "," << wav_a << "\n";
  }
  REQUIRE(run_cli({"evaluate", "--config", c.config, "--pairs",
                   "cli_test_corpus/pairs.csv"}) == 0);

  const std::string csv = slurp(c.artifacts + "/metrics.csv");
  std::istringstream lines(csv);
  std::string header, row_self, row_cross;
  std::getline(lines, header);
  CHECK(header == "id,gpe,vde,ffe,f_mae,e_mae,flags");
  std::getline(lines, row_self);
  std::getline(lines, row_cross);

  auto fields = [](const std::string& row) {
    std::vector<std::string> out;
    std::istringstream ss(row);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    out.resize(7);
    return out;
  };
  const auto self = fields(row_self);
  for (int i = 1; i <= 5; ++i) CHECK(std::stod(self[i]) == 0.0);

  const auto cross = fields(row_cross);
  const json summary = json::parse(slurp(c.artifacts + "/metrics_summary.json"));
  CHECK(summary["pairs"] == 2);
  CHECK(summary["mean_vde"].get<double>() ==
        doctest::Approx((0.0 + std::stod(cross[2])) / 2.0));
  CHECK(summary["mean_ffe"].get<double>() ==
        doctest::Approx((0.0 + std::stod(cross[3])) / 2.0));
  CHECK(summary["schema_version"] == 1);
}

TEST_CASE("predictability report: rows per source, determinism, usage error") {
  const auto& c = corpus();
  REQUIRE(run_cli(with_fast({"train", "--config", c.config, "--target",
                             "predictor:P+R"})) == 0);
  const std::string w_ckpt = c.artifacts + "/predictor_W_R.ckpt.json";
  const std::string p_ckpt = c.artifacts + "/predictor_P_R.ckpt.json";
  REQUIRE(run_cli({"report-predictability", "--config", c.config, "--source",
                   "word=" + w_ckpt, "--source", "phoneme=" + p_ckpt,
                   "--source", "word2=" + w_ckpt}) == 0);
  const std::string csv = slurp(c.artifacts + "/predictability.csv");
  std::istringstream lines(csv);
  std::string header, r1, r2, r3;
  std::getline(lines, header);
  CHECK(header == "source,f0_mae,energy_mae");
  std::getline(lines, r1);
  std::getline(lines, r2);
  std::getline(lines, r3);
  CHECK(r1.substr(0, 5) == "word,");
  CHECK(r2.substr(0, 8) == "phoneme,");
  // same checkpoint listed twice yields identical numbers
  CHECK(r3.substr(6) == r1.substr(5));

  CHECK(run_cli({"report-predictability", "--config", c.config}) == 1);
  CHECK(run_cli({"report-predictability", "--config", c.config, "--source",
                 "gone=" + c.artifacts + "/nope.ckpt.json"}) == 2);
}

TEST_CASE("provenance verification passes and detects tampering") {
  const auto& c = corpus();
  REQUIRE(run_cli({"verify", "--config", c.config}) == 0);

  // tamper with an input in the chain
  const std::string victim = c.artifacts + "/labels_rule_word_test.jsonl";
  const std::string original = slurp(victim);
  {
    std::ofstream out(victim, std::ios::binary);
    out << original << "{\"tampered\": true}\n";
  }
  CHECK(run_cli({"verify", "--config", c.config}) == 2);
  {
    std::ofstream out(victim, std::ios::binary);
    out << original;
  }
  REQUIRE(run_cli({"verify", "--config", c.config}) == 0);
}

TEST_CASE("missing config file is a usage/config error") {
  CHECK(run_cli({"train", "--config", "no_such_config.json", "--target",
                 "predictor:W+R"}) == 1);
}

TEST_CASE("three-utterance corpus: three lines; missing alignments skip") {
  testcorpus::ToyCorpusSpec spec;
  spec.root = "cli_tiny_corpus";
  spec.n_train = 3;
  spec.n_test = 1;
  spec.n_word_types = 4;
  spec.seed = 99;
  fs::remove_all(spec.root);
  const auto tiny = testcorpus::generate(spec);

  REQUIRE(run_cli({"extract", "--config", tiny.config_path, "--kind", "rule",
                   "--level", "word"}) == 0);
  const auto sets =
      read_label_file(spec.root + "/artifacts/labels_rule_word_train.jsonl");
  REQUIRE(sets.size() == 3);
  for (const auto& set : sets) {
    CHECK(set.level == TokenLevel::word);
    CHECK(!set.rule.empty());
  }

  // one missing alignment out of four utterances is > 5%: the command
  // still writes the remaining labels but exits with a data error
  fs::remove(spec.root + "/alignments/" + tiny.train_ids[1] + ".json");
  CHECK(run_cli({"extract", "--config", tiny.config_path, "--kind", "rule",
                 "--level", "word"}) == 2);
  const auto after =
      read_label_file(spec.root + "/artifacts/labels_rule_word_train.jsonl");
  CHECK(after.size() == 2);
}
