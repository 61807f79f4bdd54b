#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "prosody/alignment.hpp"
#include "prosody/error.hpp"
#include "prosody/labels.hpp"
#include "prosody/quantizer.hpp"
#include "prosody/rng.hpp"
#include "support/signals.hpp"

using namespace prosody;

namespace {

std::string two_phone_doc(double end0, double end1) {
  return R"({"utterance_id": "u1",
             "phones": [
               {"phone": "AA", "start_s": 0.0, "end_s": )" +
         std::to_string(end0) + R"(, "word_index": 0},
               {"phone": "B", "start_s": )" +
         std::to_string(end0) + R"(, "end_s": )" + std::to_string(end1) +
         R"(, "word_index": 0}],
             "words": ["ab"]})";
}

UtteranceAlignment one_word(const std::vector<int>& durations) {
  UtteranceAlignment ali;
  ali.utterance_id = "u";
  for (std::size_t i = 0; i < durations.size(); ++i) {
    ali.phonemes.push_back({"P" + std::to_string(i), durations[i], 0});
  }
  ali.words.push_back({"w", 0, static_cast<int>(durations.size())});
  return ali;
}

}  // namespace

TEST_CASE("alignment durations round with the remainder on the last phone") {
  const auto ali = parse_alignment(two_phone_doc(0.1, 0.2), 22050, 256, 17);
  REQUIRE(ali.phonemes.size() == 2);
  CHECK(ali.phonemes[0].duration_frames == 9);
  CHECK(ali.phonemes[1].duration_frames == 8);
  CHECK(ali.total_frames() == 17);
}

TEST_CASE("single phoneme covers the whole utterance") {
  const std::string doc = R"({"utterance_id": "u2",
    "phones": [{"phone": "AH", "start_s": 0.0, "end_s": 0.8, "word_index": 0}],
    "words": ["a"]})";
  const auto ali = parse_alignment(doc, 22050, 256, 64);
  CHECK(ali.phonemes[0].duration_frames == 64);
}

TEST_CASE("alignment rejects malformed segments") {
  CHECK_THROWS_AS(parse_alignment(two_phone_doc(0.2, 0.1), 22050, 256, 17),
                  DataError);
  const std::string empty_word = R"({"utterance_id": "u",
    "phones": [{"phone": "A", "start_s": 0.0, "end_s": 0.2, "word_index": 0}],
    "words": [""]})";
  CHECK_THROWS_AS(parse_alignment(empty_word, 22050, 256, 17), DataError);
  const std::string overlapping = R"({"utterance_id": "u",
    "phones": [{"phone": "A", "start_s": 0.0, "end_s": 0.2, "word_index": 0},
               {"phone": "B", "start_s": 0.1, "end_s": 0.3, "word_index": 0}],
    "words": ["ab"]})";
  CHECK_THROWS_AS(parse_alignment(overlapping, 22050, 256, 17), DataError);
}

TEST_CASE("token_average basics") {
  auto ali = one_word({2, 2});
  ali.words.clear();
  ali.words.push_back({"w1", 0, 1});
  ali.phonemes[1].word_index = 1;
  ali.words.push_back({"w2", 1, 1});

  const std::vector<double> track{1.0, 2.0, 3.0, 4.0};
  const auto phoneme = token_average(track, nullptr, ali, TokenLevel::phoneme);
  REQUIRE(phoneme.values.size() == 2);
  CHECK(phoneme.values[0] == doctest::Approx(1.5));
  CHECK(phoneme.values[1] == doctest::Approx(3.5));

  const std::vector<double> constant(4, 7.25);
  const auto c = token_average(constant, nullptr, ali, TokenLevel::word);
  for (double v : c.values) CHECK(v == doctest::Approx(7.25));
}

TEST_CASE("token_average over voiced frames only") {
  const auto ali = one_word({3});
  const std::vector<double> f0{100.0, 0.0, 200.0};
  const std::vector<std::uint8_t> voiced{1, 0, 1};
  const auto avg = token_average(f0, &voiced, ali, TokenLevel::word);
  REQUIRE(avg.values.size() == 1);
  CHECK(avg.values[0] == doctest::Approx(150.0));

  const std::vector<std::uint8_t> none{0, 0, 0};
  const auto zero = token_average(f0, &none, ali, TokenLevel::word);
  CHECK(zero.values[0] == 0.0);
}

TEST_CASE("token_average rejects length mismatch") {
  const auto ali = one_word({3});
  const std::vector<double> track{1.0, 2.0};
  CHECK_THROWS_AS(token_average(track, nullptr, ali, TokenLevel::word),
                  DataError);
}

TEST_CASE("word average equals duration-weighted phoneme average") {
  Rng rng(17);
  UtteranceAlignment ali;
  ali.utterance_id = "u";
  int t = 0;
  for (int w = 0; w < 3; ++w) {
    const int n_ph = 1 + static_cast<int>(rng.below(4));
    ali.words.push_back({"w" + std::to_string(w),
                         static_cast<int>(ali.phonemes.size()), n_ph});
    for (int p = 0; p < n_ph; ++p) {
      const int dur = 1 + static_cast<int>(rng.below(6));
      ali.phonemes.push_back({"P", dur, w});
      t += dur;
    }
  }
  std::vector<double> track(t);
  for (auto& v : track) v = rng.uniform(-2.0, 2.0);

  const auto ph = token_average(track, nullptr, ali, TokenLevel::phoneme);
  const auto wd = token_average(track, nullptr, ali, TokenLevel::word);
  const auto ph_dur = ali.durations(TokenLevel::phoneme);
  for (std::size_t w = 0; w < ali.words.size(); ++w) {
    double weighted = 0.0;
    int total = 0;
    for (int p = 0; p < ali.words[w].phoneme_count; ++p) {
      const int idx = ali.words[w].first_phoneme + p;
      weighted += ph.values[idx] * ph_dur[idx];
      total += ph_dur[idx];
    }
    CHECK(std::abs(wd.values[w] - weighted / total) < 1e-9);
  }
}

TEST_CASE("token averages of all-ones track are exactly 1") {
  const auto ali = one_word({5, 1, 9});
  const std::vector<double> ones(15, 1.0);
  for (auto level : {TokenLevel::phoneme, TokenLevel::word}) {
    const auto avg = token_average(ones, nullptr, ali, level);
    for (double v : avg.values) CHECK(v == 1.0);
  }
}

TEST_CASE("quantizer bin width and endpoint binning") {
  std::vector<double> values;
  for (int i = 0; i <= 255; ++i) values.push_back(static_cast<double>(i));
  // range [0, 255] has width 255, not 256: endpoints are data, not edges
  const auto q = Quantizer::fit(values, 256, QuantizerScale::linear);
  CHECK(q.bin_width() == doctest::Approx(255.0 / 256.0));
  CHECK(q.quantize(0.0) == 0);
  CHECK(q.quantize(255.0) == 255);
  CHECK(q.quantize(-50.0) == 0);    // clamped below fitted min
  CHECK(q.quantize(1000.0) == 255); // clamped above fitted max

  const auto q2 = Quantizer::fit({0.0, 256.0}, 256, QuantizerScale::linear);
  CHECK(q2.bin_width() == doctest::Approx(1.0));
}

TEST_CASE("quantizer round trip at a bin midpoint") {
  const Quantizer q(256, QuantizerScale::linear, 0.0, 256.0);
  const double mid7 = q.dequantize(7);
  CHECK(mid7 == doctest::Approx(7.5));
  CHECK(q.quantize(mid7) == 7);
}

TEST_CASE("quantizer round-trip error within half a bin on both scales") {
  Rng rng(23);
  for (auto scale : {QuantizerScale::linear, QuantizerScale::log}) {
    std::vector<double> fit_values;
    for (int i = 0; i < 500; ++i) fit_values.push_back(rng.uniform(1.0, 900.0));
    const auto q = Quantizer::fit(fit_values, 256, scale);
    const double w = q.bin_width();
    auto t = [&](double v) {
      return scale == QuantizerScale::log ? std::log(v) : v;
    };
    for (int i = 0; i < 1000; ++i) {
      const double v = rng.uniform(0.5, 950.0);
      const double clamped =
          std::min(std::max(v, q.fitted_min()), q.fitted_max());
      const double back = q.dequantize(q.quantize(v));
      CHECK(std::abs(t(back) - t(clamped)) <= w / 2.0 + 1e-12);
    }
  }
}

TEST_CASE("quantizer is monotone") {
  Rng rng(29);
  const Quantizer q(64, QuantizerScale::linear, -3.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    double a = rng.uniform(-4.0, 6.0);
    double b = rng.uniform(-4.0, 6.0);
    if (a > b) std::swap(a, b);
    CHECK(q.quantize(a) <= q.quantize(b));
  }
}

TEST_CASE("quantizer rejects junk") {
  CHECK_THROWS_AS(Quantizer::fit({2.0, 2.0, 2.0}, 256, QuantizerScale::linear),
                  DataError);
  const Quantizer q(256, QuantizerScale::linear, 0.0, 1.0);
  CHECK_THROWS_AS(q.quantize(std::nan("")), DataError);
}

TEST_CASE("quantizer JSON round trip") {
  const Quantizer q(256, QuantizerScale::log, 71.0, 800.0);
  const auto q2 = Quantizer::from_json(q.to_json());
  CHECK(q2.n_bins() == 256);
  CHECK(q2.scale() == QuantizerScale::log);
  CHECK(q2.fitted_min() == doctest::Approx(71.0));
  CHECK(q2.fitted_max() == doctest::Approx(800.0));
}

TEST_CASE("rule label extraction composes the pipeline") {
  const int sr = 22050;
  const auto audio = testsig::sine(220.0, 0.5, sr);
  const FrameConfig fc{};
  const PitchConfig pc{};
  const int T = frame_count(audio.samples.size(), fc);

  UtteranceAlignment ali;
  ali.utterance_id = "tone";
  ali.phonemes.push_back({"T", T, 0});
  ali.words.push_back({"tone", 0, 1});

  RuleQuantizers qs{Quantizer(256, QuantizerScale::log, 71.0, 800.0),
                    Quantizer(256, QuantizerScale::linear, 0.0, 100.0)};
  const auto labels = extract_rule_labels(audio, ali, TokenLevel::word, qs,
                                          fc, pc);
  REQUIRE(labels.rule.size() == 1);

  // composition oracle: run the stages by hand
  const auto channels =
      extract_rule_channels(audio, ali, TokenLevel::word, fc, pc);
  CHECK(labels.rule[0].f0_bin == qs.f0.quantize(channels.f0.values[0]));
  CHECK(labels.rule[0].energy_bin ==
        qs.energy.quantize(channels.energy.values[0]));
  // the tone's measured F0 lands in the same bin as the nominal 220 Hz
  CHECK(labels.rule[0].f0_bin == qs.f0.quantize(220.0));

  // a one-phoneme word yields identical labels at both levels
  const auto ph = extract_rule_labels(audio, ali, TokenLevel::phoneme, qs,
                                      fc, pc);
  CHECK(ph.rule[0].f0_bin == labels.rule[0].f0_bin);
  CHECK(ph.rule[0].energy_bin == labels.rule[0].energy_bin);
}

TEST_CASE("silence maps to the lowest f0 bin") {
  const auto audio = testsig::silence(0.5, 22050);
  const FrameConfig fc{};
  const int T = frame_count(audio.samples.size(), fc);
  UtteranceAlignment ali;
  ali.utterance_id = "sil";
  ali.phonemes.push_back({"SIL", T, 0});
  ali.words.push_back({"sil", 0, 1});
  RuleQuantizers qs{Quantizer(256, QuantizerScale::log, 71.0, 800.0),
                    Quantizer(256, QuantizerScale::linear, 0.0, 100.0)};
  const auto labels =
      extract_rule_labels(audio, ali, TokenLevel::word, qs, FrameConfig{},
                          PitchConfig{});
  CHECK(labels.rule[0].f0_bin == 0);
  CHECK(labels.rule[0].f0_bin == qs.f0.quantize(0.0));
}

TEST_CASE("label sets serialize deterministically") {
  ProsodyLabelSet set;
  set.utterance_id = "u9";
  set.kind = LabelKind::neural_based;
  set.level = TokenLevel::phoneme;
  set.neural.push_back({42, {0.125, -1.5, 3.0}});
  set.neural.push_back({7, {0.0, 0.25, -0.75}});
  const auto line = set.to_json_line();
  CHECK(line == ProsodyLabelSet::from_json_line(line).to_json_line());

  ProsodyLabelSet rule_set;
  rule_set.utterance_id = "u10";
  rule_set.kind = LabelKind::rule_based;
  rule_set.level = TokenLevel::word;
  rule_set.rule.push_back({3, 250});
  const auto rule_line = rule_set.to_json_line();
  CHECK(rule_line ==
        ProsodyLabelSet::from_json_line(rule_line).to_json_line());
}
