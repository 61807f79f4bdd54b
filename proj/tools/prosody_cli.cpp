#include <vector>
#include <string>

#include "prosody/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return prosody::cli::run(args);
}
