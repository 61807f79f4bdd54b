// Seeded synthetic speech corpus where word identity carries the prosody
// signal: every word type has its own F0 mean and amplitude, while phoneme
// symbols are shared across words.
#ifndef PROSODY_TESTS_SUPPORT_TOY_CORPUS_HPP_
#define PROSODY_TESTS_SUPPORT_TOY_CORPUS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace prosody::testcorpus {

struct ToyCorpusSpec {
  std::string root;
  int n_train = 40;
  int n_test = 10;
  int sample_rate = 22050;
  int n_word_types = 12;
  int n_phone_types = 6;
  int min_words = 2, max_words = 4;
  double min_phone_s = 0.07, max_phone_s = 0.13;
  int embedding_dim = 16;
  std::uint64_t seed = 42;
};

struct ToyCorpus {
  std::string root;
  std::string config_path;
  std::vector<std::string> train_ids, test_ids;
};

// Writes wavs/, alignments/, splits/, embeddings.txt, and a desk-scale
// config.json under spec.root.
ToyCorpus generate(const ToyCorpusSpec& spec);

}  // namespace prosody::testcorpus

#endif  // PROSODY_TESTS_SUPPORT_TOY_CORPUS_HPP_
