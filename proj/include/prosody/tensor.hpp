#ifndef PROSODY_TENSOR_HPP_
#define PROSODY_TENSOR_HPP_

#include <string>
#include <vector>

namespace prosody::nn {

// Dense row-major value container. Gradients live next to the values they
// belong to (layer parameter buffers), not inside the tensor.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> values);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }
  int numel() const;
  // product of all dims except the last (the "row" count for 2D-style ops)
  int rows() const;
  int cols() const { return shape.empty() ? 0 : shape.back(); }

  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }

  std::string shape_str() const;
};

}  // namespace prosody::nn

#endif  // PROSODY_TENSOR_HPP_
