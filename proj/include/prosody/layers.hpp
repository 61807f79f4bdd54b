#ifndef PROSODY_LAYERS_HPP_
#define PROSODY_LAYERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/rng.hpp"
#include "prosody/tensor.hpp"

namespace prosody::nn {

enum class Mode { train, eval };

// One differentiable layer. forward() caches whatever backward() needs;
// backward() accumulates parameter gradients and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  void zero_grad() { grads_.assign(params_.size(), 0.0); }

  virtual void init(Rng& rng) { (void)rng; }
  virtual void attach_rng(Rng* rng) { (void)rng; }
  virtual nlohmann::json hyperparams() const { return nlohmann::json::object(); }

 protected:
  void require_forward() const;

  std::vector<double> params_;
  std::vector<double> grads_;
  bool forward_done_ = false;
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim);
  std::string kind() const override { return "linear"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  nlohmann::json hyperparams() const override;

 private:
  int in_, out_;
  Tensor cached_x_;
};

// Same-padded 1D convolution over [length, channels] input.
class Conv1d : public Layer {
 public:
  Conv1d(int in_ch, int out_ch, int kernel);
  std::string kind() const override { return "conv1d"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  nlohmann::json hyperparams() const override;

 private:
  int in_, out_, kernel_;
  Tensor cached_x_;
};

// Same-padded 2D convolution over [height, width, channels] input.
class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel_h, int kernel_w);
  std::string kind() const override { return "conv2d"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  nlohmann::json hyperparams() const override;

 private:
  int in_, out_, kh_, kw_;
  Tensor cached_x_;
};

class Relu : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<std::uint8_t> mask_;
};

// Normalization over the last dimension with learned gain and bias.
class LayerNorm : public Layer {
 public:
  explicit LayerNorm(int dim, double eps = 1e-5);
  std::string kind() const override { return "layer_norm"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  nlohmann::json hyperparams() const override;

 private:
  int dim_;
  double eps_;
  Tensor cached_norm_;
  std::vector<double> cached_inv_std_;
};

// Inverted dropout: train-mode masks are scaled by 1/(1-p) so eval needs no
// rescaling. Masks come from the owning network's seeded stream.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);
  std::string kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void attach_rng(Rng* rng) override { rng_ = rng; }
  nlohmann::json hyperparams() const override;

 private:
  double rate_;
  Rng* rng_ = nullptr;
  std::vector<double> mask_;
  bool masked_ = false;
};

// Trainable id -> vector table. Input holds integer ids; no gradient flows
// back to them.
class EmbeddingLookup : public Layer {
 public:
  EmbeddingLookup(int vocab_size, int dim);
  std::string kind() const override { return "embedding_lookup"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void init(Rng& rng) override;
  nlohmann::json hyperparams() const override;

 private:
  int vocab_, dim_;
  std::vector<int> cached_ids_;
};

// Mean over each token's frame span: [frames, channels] -> [tokens, channels].
// Spans must be set before every forward.
class TokenMeanPool : public Layer {
 public:
  std::string kind() const override { return "token_mean_pool"; }
  void set_spans(std::vector<int> spans) { spans_ = std::move(spans); }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> spans_;
  int cached_frames_ = 0;
};

// Collapses every dimension after the first: [a, b, c] -> [a, b*c].
class Flatten : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<int> cached_shape_;
};

// Sequential container owning its layers and the dropout/init RNG stream.
class Network {
 public:
  explicit Network(std::uint64_t seed);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  Layer* add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L* emplace(Args&&... args) {
    return static_cast<L*>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  // Kaiming-style fan-in init for every layer, in order, from this
  // network's stream. Same seed, same layer list => bit-identical weights.
  void init_params();

  Tensor forward(const Tensor& x, Mode mode);
  // Throws std::logic_error when no train-mode forward preceded it.
  Tensor backward(const Tensor& grad_out);
  void zero_grad();

  std::vector<Layer*> layers();
  std::size_t layer_count() const { return layers_.size(); }
  Layer* layer(std::size_t i) { return layers_[i].get(); }
  Rng& rng() { return rng_; }

  nlohmann::json to_json(bool full_precision) const;
  static Network from_json(const nlohmann::json& j);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng rng_;
  bool forward_recorded_ = false;
};

std::unique_ptr<Layer> make_layer(const std::string& kind,
                                  const nlohmann::json& hyperparams);

}  // namespace prosody::nn

#endif  // PROSODY_LAYERS_HPP_
