#ifndef PROSODY_ALIGNMENT_HPP_
#define PROSODY_ALIGNMENT_HPP_

#include <string>
#include <vector>

namespace prosody {

enum class TokenLevel { phoneme, word };

std::string to_string(TokenLevel level);
TokenLevel token_level_from_string(const std::string& s);

struct AlignedPhoneme {
  std::string symbol;
  int duration_frames = 0;
  int word_index = 0;
};

struct AlignedWord {
  std::string text;
  int first_phoneme = 0;
  int phoneme_count = 0;
};

// Phoneme/word segmentation of one utterance. Phoneme durations partition the
// utterance's frame axis: they always sum to the frame count they were built
// against.
struct UtteranceAlignment {
  std::string utterance_id;
  std::vector<AlignedPhoneme> phonemes;
  std::vector<AlignedWord> words;

  int total_frames() const;
  int token_count(TokenLevel level) const;
  // duration_frames per token at the requested level
  std::vector<int> durations(TokenLevel level) const;
  // phoneme count per word, in order
  std::vector<int> phonemes_per_word() const;
};

// Parses the per-utterance alignment JSON document:
//   {"utterance_id": "...",
//    "phones": [{"phone": "...", "start_s": 0.0, "end_s": 0.1,
//                "word_index": 0}, ...],
//    "words": ["...", ...]}
// Segment times are converted to frame counts against hop_length/sample_rate.
// Boundaries are rounded and the rounding remainder is pushed onto the final
// phoneme so the durations sum to total_frames exactly.
UtteranceAlignment parse_alignment(const std::string& json_text,
                                   int sample_rate, int hop_length,
                                   int total_frames);

UtteranceAlignment parse_alignment_file(const std::string& path,
                                        int sample_rate, int hop_length,
                                        int total_frames);

// Text-side-only variant for prediction: no audio is available, so the frame
// total is synthesized from the last segment end. Durations are approximate;
// token identities, order, and word grouping are exact.
UtteranceAlignment parse_alignment_text_only(const std::string& json_text,
                                             int sample_rate, int hop_length);
UtteranceAlignment parse_alignment_file_text_only(const std::string& path,
                                                  int sample_rate,
                                                  int hop_length);

}  // namespace prosody

#endif  // PROSODY_ALIGNMENT_HPP_
