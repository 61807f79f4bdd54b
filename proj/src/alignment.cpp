#include "prosody/alignment.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "prosody/error.hpp"

namespace prosody {

using nlohmann::json;

std::string to_string(TokenLevel level) {
  return level == TokenLevel::phoneme ? "phoneme" : "word";
}

TokenLevel token_level_from_string(const std::string& s) {
  if (s == "phoneme") return TokenLevel::phoneme;
  if (s == "word") return TokenLevel::word;
  throw ConfigError("unknown token level: " + s);
}

int UtteranceAlignment::total_frames() const {
  int sum = 0;
  for (const auto& p : phonemes) sum += p.duration_frames;
  return sum;
}

int UtteranceAlignment::token_count(TokenLevel level) const {
  return level == TokenLevel::phoneme ? static_cast<int>(phonemes.size())
                                      : static_cast<int>(words.size());
}

std::vector<int> UtteranceAlignment::durations(TokenLevel level) const {
  std::vector<int> out;
  if (level == TokenLevel::phoneme) {
    out.reserve(phonemes.size());
    for (const auto& p : phonemes) out.push_back(p.duration_frames);
  } else {
    out.reserve(words.size());
    for (const auto& w : words) {
      int sum = 0;
      for (int i = 0; i < w.phoneme_count; ++i) {
        sum += phonemes[w.first_phoneme + i].duration_frames;
      }
      out.push_back(sum);
    }
  }
  return out;
}

std::vector<int> UtteranceAlignment::phonemes_per_word() const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.phoneme_count);
  return out;
}

UtteranceAlignment parse_alignment(const std::string& json_text,
                                   int sample_rate, int hop_length,
                                   int total_frames) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("alignment JSON parse failure: ") + e.what());
  }
  if (!doc.contains("phones") || !doc.contains("words")) {
    throw DataError("alignment document needs 'phones' and 'words'");
  }

  UtteranceAlignment ali;
  ali.utterance_id = doc.value("utterance_id", "");

  const auto& phones = doc["phones"];
  const auto& words = doc["words"];
  if (phones.empty()) throw DataError("alignment has no phones");
  if (words.empty()) throw DataError("alignment has no words");
  const int n = static_cast<int>(phones.size());
  if (total_frames < n) {
    throw DataError("alignment has more phones than frames");
  }

  double prev_end = -1.0;
  int prev_word = 0;
  std::vector<double> ends(n);
  for (int i = 0; i < n; ++i) {
    const auto& p = phones[i];
    AlignedPhoneme ap;
    ap.symbol = p.value("phone", "");
    if (ap.symbol.empty()) throw DataError("alignment phone missing symbol");
    const double start = p.value("start_s", -1.0);
    const double end = p.value("end_s", -1.0);
    ap.word_index = p.value("word_index", -1);
    if (start < 0.0 || end <= start) {
      throw DataError("alignment segment end must follow start");
    }
    if (prev_end >= 0.0 && start < prev_end - 1e-9) {
      throw DataError("alignment segments overlap or are out of order");
    }
    if (ap.word_index < 0 ||
        ap.word_index >= static_cast<int>(words.size()) ||
        ap.word_index < prev_word || ap.word_index > prev_word + 1) {
      throw DataError("alignment word indices must advance contiguously");
    }
    prev_word = ap.word_index;
    prev_end = end;
    ends[i] = end;
    ali.phonemes.push_back(std::move(ap));
  }
  if (prev_word != static_cast<int>(words.size()) - 1) {
    throw DataError("alignment words without phones");
  }

  // Seconds -> frame boundaries. The final boundary is forced to
  // total_frames, which pushes all rounding error onto the last phoneme.
  const double frames_per_second =
      static_cast<double>(sample_rate) / hop_length;
  int prev_boundary = 0;
  for (int i = 0; i < n; ++i) {
    int boundary =
        i == n - 1
            ? total_frames
            : static_cast<int>(std::lround(ends[i] * frames_per_second));
    // keep every duration >= 1 even for very short segments
    const int min_boundary = prev_boundary + 1;
    const int max_boundary = total_frames - (n - 1 - i);
    boundary = std::max(boundary, min_boundary);
    boundary = std::min(boundary, max_boundary);
    ali.phonemes[i].duration_frames = boundary - prev_boundary;
    prev_boundary = boundary;
  }

  for (int w = 0; w < static_cast<int>(words.size()); ++w) {
    AlignedWord aw;
    aw.text = words[w].get<std::string>();
    if (aw.text.empty()) throw DataError("alignment contains an empty word");
    aw.first_phoneme = -1;
    for (int i = 0; i < n; ++i) {
      if (ali.phonemes[i].word_index == w) {
        if (aw.first_phoneme < 0) aw.first_phoneme = i;
        ++aw.phoneme_count;
      }
    }
    if (aw.first_phoneme < 0) {
      throw DataError("alignment word has no phones: " + aw.text);
    }
    ali.words.push_back(std::move(aw));
  }
  return ali;
}

UtteranceAlignment parse_alignment_file(const std::string& path,
                                        int sample_rate, int hop_length,
                                        int total_frames) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_alignment(ss.str(), sample_rate, hop_length, total_frames);
}

UtteranceAlignment parse_alignment_text_only(const std::string& json_text,
                                             int sample_rate, int hop_length) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("alignment JSON parse failure: ") + e.what());
  }
  if (!doc.contains("phones") || doc["phones"].empty()) {
    throw DataError("alignment document needs non-empty 'phones'");
  }
  const double last_end = doc["phones"].back().value("end_s", 0.0);
  const int n = static_cast<int>(doc["phones"].size());
  const int total = std::max(
      n, static_cast<int>(std::lround(last_end * sample_rate / hop_length)));
  return parse_alignment(json_text, sample_rate, hop_length, total);
}

UtteranceAlignment parse_alignment_file_text_only(const std::string& path,
                                                  int sample_rate,
                                                  int hop_length) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alignment file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_alignment_text_only(ss.str(), sample_rate, hop_length);
}

}  // namespace prosody
