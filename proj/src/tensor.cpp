#include "prosody/tensor.hpp"

#include <sstream>

#include "prosody/error.hpp"

namespace prosody::nn {

namespace {
std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ConfigError("tensor dimensions must be non-negative");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  v.assign(product(shape), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> values)
    : shape(std::move(s)), v(std::move(values)) {
  if (v.size() != product(shape)) {
    throw ConfigError("tensor value count does not match shape");
  }
}

int Tensor::numel() const { return static_cast<int>(v.size()); }

int Tensor::rows() const {
  if (shape.empty()) return 0;
  int n = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) n *= shape[i];
  return n;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? ", " : "") << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace prosody::nn
