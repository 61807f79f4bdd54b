#ifndef PROSODY_EMBEDDINGS_HPP_
#define PROSODY_EMBEDDINGS_HPP_

#include <string>
#include <unordered_map>
#include <vector>

namespace prosody::pred {

// Pretrained word vectors ingested from a text export. Format: a header line
// "dim D", then one "token<TAB>v1 v2 ... vD" line per word. Out-of-vocabulary
// words map to the zero vector; callers count them via the oov counter.
struct WordEmbeddings {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> table;

  std::vector<double> lookup(const std::string& word, long* oov_count) const;
};

WordEmbeddings read_embedding_file(const std::string& path);
void write_embedding_file(const std::string& path, const WordEmbeddings& emb);

}  // namespace prosody::pred

#endif  // PROSODY_EMBEDDINGS_HPP_
