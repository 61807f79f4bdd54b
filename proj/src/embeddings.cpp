#include "prosody/embeddings.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "prosody/error.hpp"

namespace prosody::pred {

std::vector<double> WordEmbeddings::lookup(const std::string& word,
                                           long* oov_count) const {
  const auto it = table.find(word);
  if (it != table.end()) return it->second;
  if (oov_count != nullptr) ++*oov_count;
  return std::vector<double>(dim, 0.0);
}

WordEmbeddings read_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("embedding file is empty: " + path);
  }
  std::istringstream header(line);
  std::string tag;
  WordEmbeddings emb;
  header >> tag >> emb.dim;
  if (tag != "dim" || emb.dim <= 0) {
    throw DataError("embedding file must start with a 'dim D' header: " + path);
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("embedding line " + std::to_string(line_no) +
                      " has no token<TAB>values separator");
    }
    const std::string token = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    std::vector<double> vec;
    vec.reserve(emb.dim);
    double v;
    while (values >> v) vec.push_back(v);
    if (static_cast<int>(vec.size()) != emb.dim) {
      throw DataError("embedding line " + std::to_string(line_no) + " has " +
                      std::to_string(vec.size()) + " values, expected " +
                      std::to_string(emb.dim));
    }
    emb.table[token] = std::move(vec);
  }
  return emb;
}

void write_embedding_file(const std::string& path, const WordEmbeddings& emb) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out << "dim " << emb.dim << "\n";
  std::vector<std::string> tokens;
  tokens.reserve(emb.table.size());
  for (const auto& [token, _] : emb.table) tokens.push_back(token);
  std::sort(tokens.begin(), tokens.end());
  out.precision(17);
  for (const auto& token : tokens) {
    out << token << "\t";
    const auto& vec = emb.table.at(token);
    for (std::size_t i = 0; i < vec.size(); ++i) {
      out << (i ? " " : "") << vec[i];
    }
    out << "\n";
  }
}

}  // namespace prosody::pred
