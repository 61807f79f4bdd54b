#include "prosody/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "prosody/error.hpp"

namespace prosody::nn {

using nlohmann::json;

namespace {

void require_shape(bool ok, const std::string& layer, const Tensor& x,
                   const std::string& expected) {
  if (!ok) {
    throw DataError("layer " + layer + ": input shape " + x.shape_str() +
                    " does not match expected " + expected);
  }
}

double kaiming_bound(int fan_in) { return std::sqrt(6.0 / fan_in); }

}  // namespace

void Layer::require_forward() const {
  if (!forward_done_) {
    throw std::logic_error("backward called before forward on layer");
  }
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
  if (in_ <= 0 || out_ <= 0) throw ConfigError("linear dims must be positive");
  params_.assign(static_cast<std::size_t>(out_) * in_ + out_, 0.0);
  zero_grad();
}

void Linear::init(Rng& rng) {
  const double bound = kaiming_bound(in_);
  for (int i = 0; i < out_ * in_; ++i) params_[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < out_; ++i) params_[out_ * in_ + i] = 0.0;
}

json Linear::hyperparams() const { return {{"in", in_}, {"out", out_}}; }

Tensor Linear::forward(const Tensor& x, Mode) {
  require_shape(x.rank() >= 1 && x.cols() == in_, kind() + "(" +
                std::to_string(in_) + "->" + std::to_string(out_) + ")",
                x, "[..., " + std::to_string(in_) + "]");
  cached_x_ = x;
  forward_done_ = true;
  auto shape = x.shape;
  shape.back() = out_;
  Tensor y(std::move(shape));
  const int rows = x.rows();
  const double* w = params_.data();
  const double* b = params_.data() + static_cast<std::size_t>(out_) * in_;
  for (int r = 0; r < rows; ++r) {
    const double* xr = &x.v[static_cast<std::size_t>(r) * in_];
    double* yr = &y.v[static_cast<std::size_t>(r) * out_];
    for (int o = 0; o < out_; ++o) {
      const double* wo = w + static_cast<std::size_t>(o) * in_;
      double acc = b[o];
      for (int i = 0; i < in_; ++i) acc += wo[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  require_forward();
  const int rows = cached_x_.rows();
  Tensor dx(cached_x_.shape);
  double* dw = grads_.data();
  double* db = grads_.data() + static_cast<std::size_t>(out_) * in_;
  const double* w = params_.data();
  for (int r = 0; r < rows; ++r) {
    const double* xr = &cached_x_.v[static_cast<std::size_t>(r) * in_];
    const double* gr = &grad_out.v[static_cast<std::size_t>(r) * out_];
    double* dxr = &dx.v[static_cast<std::size_t>(r) * in_];
    for (int o = 0; o < out_; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      double* dwo = dw + static_cast<std::size_t>(o) * in_;
      const double* wo = w + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        dwo[i] += g * xr[i];
        dxr[i] += g * wo[i];
      }
      db[o] += g;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv1d — weights laid out [out][kernel][in] so the innermost loop runs
// contiguously over both the input row and the kernel slice.

Conv1d::Conv1d(int in_ch, int out_ch, int kernel)
    : in_(in_ch), out_(out_ch), kernel_(kernel) {
  if (in_ <= 0 || out_ <= 0 || kernel_ <= 0 || kernel_ % 2 == 0) {
    throw ConfigError("conv1d needs positive dims and an odd kernel");
  }
  params_.assign(
      static_cast<std::size_t>(out_) * kernel_ * in_ + out_, 0.0);
  zero_grad();
}

void Conv1d::init(Rng& rng) {
  const double bound = kaiming_bound(in_ * kernel_);
  const int n_w = out_ * kernel_ * in_;
  for (int i = 0; i < n_w; ++i) params_[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < out_; ++i) params_[n_w + i] = 0.0;
}

json Conv1d::hyperparams() const {
  return {{"in", in_}, {"out", out_}, {"kernel", kernel_}};
}

Tensor Conv1d::forward(const Tensor& x, Mode) {
  require_shape(x.rank() == 2 && x.dim(1) == in_, "conv1d", x,
                "[length, " + std::to_string(in_) + "]");
  cached_x_ = x;
  forward_done_ = true;
  const int length = x.dim(0);
  const int pad = kernel_ / 2;
  Tensor y({length, out_});
  const double* w = params_.data();
  const double* b = params_.data() + static_cast<std::size_t>(out_) * kernel_ * in_;
  for (int t = 0; t < length; ++t) {
    double* yr = &y.v[static_cast<std::size_t>(t) * out_];
    for (int o = 0; o < out_; ++o) {
      double acc = b[o];
      for (int d = 0; d < kernel_; ++d) {
        const int src = t + d - pad;
        if (src < 0 || src >= length) continue;
        const double* wo = w + (static_cast<std::size_t>(o) * kernel_ + d) * in_;
        const double* xr = &x.v[static_cast<std::size_t>(src) * in_];
        for (int i = 0; i < in_; ++i) acc += wo[i] * xr[i];
      }
      yr[o] = acc;
    }
  }
  return y;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  require_forward();
  const int length = cached_x_.dim(0);
  const int pad = kernel_ / 2;
  Tensor dx(cached_x_.shape);
  double* dw = grads_.data();
  double* db = grads_.data() + static_cast<std::size_t>(out_) * kernel_ * in_;
  const double* w = params_.data();
  for (int t = 0; t < length; ++t) {
    const double* gr = &grad_out.v[static_cast<std::size_t>(t) * out_];
    for (int o = 0; o < out_; ++o) {
      const double g = gr[o];
      if (g == 0.0) continue;
      db[o] += g;
      for (int d = 0; d < kernel_; ++d) {
        const int src = t + d - pad;
        if (src < 0 || src >= length) continue;
        const std::size_t w_off = (static_cast<std::size_t>(o) * kernel_ + d) * in_;
        const double* xr = &cached_x_.v[static_cast<std::size_t>(src) * in_];
        double* dxr = &dx.v[static_cast<std::size_t>(src) * in_];
        const double* wo = w + w_off;
        double* dwo = dw + w_off;
        for (int i = 0; i < in_; ++i) {
          dwo[i] += g * xr[i];
          dxr[i] += g * wo[i];
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv2d — weights [out][kh][kw][in], input [H, W, in].

Conv2d::Conv2d(int in_ch, int out_ch, int kernel_h, int kernel_w)
    : in_(in_ch), out_(out_ch), kh_(kernel_h), kw_(kernel_w) {
  if (in_ <= 0 || out_ <= 0 || kh_ <= 0 || kw_ <= 0 || kh_ % 2 == 0 ||
      kw_ % 2 == 0) {
    throw ConfigError("conv2d needs positive dims and odd kernels");
  }
  params_.assign(
      static_cast<std::size_t>(out_) * kh_ * kw_ * in_ + out_, 0.0);
  zero_grad();
}

void Conv2d::init(Rng& rng) {
  const double bound = kaiming_bound(in_ * kh_ * kw_);
  const int n_w = out_ * kh_ * kw_ * in_;
  for (int i = 0; i < n_w; ++i) params_[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < out_; ++i) params_[n_w + i] = 0.0;
}

json Conv2d::hyperparams() const {
  return {{"in", in_}, {"out", out_}, {"kernel_h", kh_}, {"kernel_w", kw_}};
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  require_shape(x.rank() == 3 && x.dim(2) == in_, "conv2d", x,
                "[height, width, " + std::to_string(in_) + "]");
  cached_x_ = x;
  forward_done_ = true;
  const int H = x.dim(0), W = x.dim(1);
  const int ph = kh_ / 2, pw = kw_ / 2;
  Tensor y({H, W, out_});
  const double* w = params_.data();
  const double* b =
      params_.data() + static_cast<std::size_t>(out_) * kh_ * kw_ * in_;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double* yp = &y.v[(static_cast<std::size_t>(r) * W + c) * out_];
      for (int o = 0; o < out_; ++o) {
        double acc = b[o];
        for (int dh = 0; dh < kh_; ++dh) {
          const int sr = r + dh - ph;
          if (sr < 0 || sr >= H) continue;
          for (int dw_i = 0; dw_i < kw_; ++dw_i) {
            const int sc = c + dw_i - pw;
            if (sc < 0 || sc >= W) continue;
            const double* wo =
                w + ((static_cast<std::size_t>(o) * kh_ + dh) * kw_ + dw_i) * in_;
            const double* xp =
                &x.v[(static_cast<std::size_t>(sr) * W + sc) * in_];
            for (int i = 0; i < in_; ++i) acc += wo[i] * xp[i];
          }
        }
        yp[o] = acc;
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  require_forward();
  const int H = cached_x_.dim(0), W = cached_x_.dim(1);
  const int ph = kh_ / 2, pw = kw_ / 2;
  Tensor dx(cached_x_.shape);
  double* dwg = grads_.data();
  double* db =
      grads_.data() + static_cast<std::size_t>(out_) * kh_ * kw_ * in_;
  const double* w = params_.data();
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double* gp = &grad_out.v[(static_cast<std::size_t>(r) * W + c) * out_];
      for (int o = 0; o < out_; ++o) {
        const double g = gp[o];
        if (g == 0.0) continue;
        db[o] += g;
        for (int dh = 0; dh < kh_; ++dh) {
          const int sr = r + dh - ph;
          if (sr < 0 || sr >= H) continue;
          for (int dw_i = 0; dw_i < kw_; ++dw_i) {
            const int sc = c + dw_i - pw;
            if (sc < 0 || sc >= W) continue;
            const std::size_t w_off =
                ((static_cast<std::size_t>(o) * kh_ + dh) * kw_ + dw_i) * in_;
            const double* xp =
                &cached_x_.v[(static_cast<std::size_t>(sr) * W + sc) * in_];
            double* dxp = &dx.v[(static_cast<std::size_t>(sr) * W + sc) * in_];
            const double* wo = w + w_off;
            double* dwo = dwg + w_off;
            for (int i = 0; i < in_; ++i) {
              dwo[i] += g * xp[i];
              dxp[i] += g * wo[i];
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Relu

Tensor Relu::forward(const Tensor& x, Mode) {
  forward_done_ = true;
  mask_.assign(x.v.size(), 0);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    if (x.v[i] > 0.0) {
      y.v[i] = x.v[i];
      mask_[i] = 1;
    }
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) {
  require_forward();
  Tensor dx(grad_out.shape);
  for (std::size_t i = 0; i < grad_out.v.size(); ++i) {
    dx.v[i] = mask_[i] ? grad_out.v[i] : 0.0;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm::LayerNorm(int dim, double eps) : dim_(dim), eps_(eps) {
  if (dim_ <= 0) throw ConfigError("layer_norm dim must be positive");
  params_.assign(static_cast<std::size_t>(dim_) * 2, 0.0);
  zero_grad();
}

void LayerNorm::init(Rng&) {
  for (int i = 0; i < dim_; ++i) params_[i] = 1.0;          // gain
  for (int i = 0; i < dim_; ++i) params_[dim_ + i] = 0.0;   // bias
}

json LayerNorm::hyperparams() const { return {{"dim", dim_}}; }

Tensor LayerNorm::forward(const Tensor& x, Mode) {
  require_shape(x.rank() >= 1 && x.cols() == dim_, "layer_norm", x,
                "[..., " + std::to_string(dim_) + "]");
  forward_done_ = true;
  const int rows = x.rows();
  cached_norm_ = Tensor(x.shape);
  cached_inv_std_.assign(rows, 0.0);
  Tensor y(x.shape);
  const double* gain = params_.data();
  const double* bias = params_.data() + dim_;
  for (int r = 0; r < rows; ++r) {
    const double* xr = &x.v[static_cast<std::size_t>(r) * dim_];
    double mean = 0.0;
    for (int i = 0; i < dim_; ++i) mean += xr[i];
    mean /= dim_;
    double var = 0.0;
    for (int i = 0; i < dim_; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= dim_;
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    cached_inv_std_[r] = inv_std;
    double* nr = &cached_norm_.v[static_cast<std::size_t>(r) * dim_];
    double* yr = &y.v[static_cast<std::size_t>(r) * dim_];
    for (int i = 0; i < dim_; ++i) {
      nr[i] = (xr[i] - mean) * inv_std;
      yr[i] = nr[i] * gain[i] + bias[i];
    }
  }
  return y;
}

Tensor LayerNorm::backward(const Tensor& grad_out) {
  require_forward();
  const int rows = cached_norm_.rows();
  Tensor dx(cached_norm_.shape);
  double* dgain = grads_.data();
  double* dbias = grads_.data() + dim_;
  const double* gain = params_.data();
  for (int r = 0; r < rows; ++r) {
    const double* gr = &grad_out.v[static_cast<std::size_t>(r) * dim_];
    const double* nr = &cached_norm_.v[static_cast<std::size_t>(r) * dim_];
    double* dxr = &dx.v[static_cast<std::size_t>(r) * dim_];
    double sum_dn = 0.0, sum_dn_n = 0.0;
    for (int i = 0; i < dim_; ++i) {
      dgain[i] += gr[i] * nr[i];
      dbias[i] += gr[i];
      const double dn = gr[i] * gain[i];
      sum_dn += dn;
      sum_dn_n += dn * nr[i];
    }
    const double inv_dim = 1.0 / dim_;
    for (int i = 0; i < dim_; ++i) {
      const double dn = gr[i] * gain[i];
      dxr[i] = cached_inv_std_[r] *
               (dn - sum_dn * inv_dim - nr[i] * sum_dn_n * inv_dim);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate_ < 0.0 || rate_ >= 1.0) throw ConfigError("dropout rate in [0,1)");
}

json Dropout::hyperparams() const { return {{"rate", rate_}}; }

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  forward_done_ = true;
  if (mode == Mode::eval || rate_ == 0.0) {
    masked_ = false;
    return x;
  }
  if (rng_ == nullptr) {
    throw std::logic_error("dropout layer used outside a network");
  }
  masked_ = true;
  const double keep_scale = 1.0 / (1.0 - rate_);
  mask_.assign(x.v.size(), 0.0);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    if (rng_->uniform() >= rate_) {
      mask_[i] = keep_scale;
      y.v[i] = x.v[i] * keep_scale;
    }
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  require_forward();
  if (!masked_) return grad_out;
  Tensor dx(grad_out.shape);
  for (std::size_t i = 0; i < grad_out.v.size(); ++i) {
    dx.v[i] = grad_out.v[i] * mask_[i];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// EmbeddingLookup

EmbeddingLookup::EmbeddingLookup(int vocab_size, int dim)
    : vocab_(vocab_size), dim_(dim) {
  if (vocab_ <= 0 || dim_ <= 0) {
    throw ConfigError("embedding needs positive vocab and dim");
  }
  params_.assign(static_cast<std::size_t>(vocab_) * dim_, 0.0);
  zero_grad();
}

void EmbeddingLookup::init(Rng& rng) {
  const double bound = std::sqrt(3.0 / dim_);
  for (auto& p : params_) p = rng.uniform(-bound, bound);
}

json EmbeddingLookup::hyperparams() const {
  return {{"vocab", vocab_}, {"dim", dim_}};
}

Tensor EmbeddingLookup::forward(const Tensor& x, Mode) {
  require_shape(x.rank() == 1, "embedding_lookup", x, "[n]");
  forward_done_ = true;
  const int n = x.dim(0);
  cached_ids_.resize(n);
  Tensor y({n, dim_});
  for (int r = 0; r < n; ++r) {
    const int id = static_cast<int>(std::lround(x.v[r]));
    if (id < 0 || id >= vocab_) {
      throw DataError("embedding id " + std::to_string(id) +
                      " outside vocab of " + std::to_string(vocab_));
    }
    cached_ids_[r] = id;
    const double* row = &params_[static_cast<std::size_t>(id) * dim_];
    double* yr = &y.v[static_cast<std::size_t>(r) * dim_];
    for (int i = 0; i < dim_; ++i) yr[i] = row[i];
  }
  return y;
}

Tensor EmbeddingLookup::backward(const Tensor& grad_out) {
  require_forward();
  const int n = static_cast<int>(cached_ids_.size());
  for (int r = 0; r < n; ++r) {
    double* grow = &grads_[static_cast<std::size_t>(cached_ids_[r]) * dim_];
    const double* gr = &grad_out.v[static_cast<std::size_t>(r) * dim_];
    for (int i = 0; i < dim_; ++i) grow[i] += gr[i];
  }
  return Tensor({n});  // ids carry no gradient
}

// ---------------------------------------------------------------------------
// TokenMeanPool

Tensor TokenMeanPool::forward(const Tensor& x, Mode) {
  require_shape(x.rank() == 2, "token_mean_pool", x, "[frames, channels]");
  if (spans_.empty()) {
    throw std::logic_error("token_mean_pool: spans not set before forward");
  }
  int total = 0;
  for (int s : spans_) {
    if (s <= 0) throw DataError("token_mean_pool: span must be >= 1");
    total += s;
  }
  require_shape(total == x.dim(0), "token_mean_pool", x,
                "[" + std::to_string(total) + ", channels]");
  forward_done_ = true;
  cached_frames_ = x.dim(0);
  const int C = x.dim(1);
  Tensor y({static_cast<int>(spans_.size()), C});
  int t = 0;
  for (std::size_t s = 0; s < spans_.size(); ++s) {
    double* yr = &y.v[s * C];
    for (int i = 0; i < spans_[s]; ++i, ++t) {
      const double* xr = &x.v[static_cast<std::size_t>(t) * C];
      for (int c = 0; c < C; ++c) yr[c] += xr[c];
    }
    for (int c = 0; c < C; ++c) yr[c] /= spans_[s];
  }
  return y;
}

Tensor TokenMeanPool::backward(const Tensor& grad_out) {
  require_forward();
  const int C = grad_out.dim(1);
  Tensor dx({cached_frames_, C});
  int t = 0;
  for (std::size_t s = 0; s < spans_.size(); ++s) {
    const double* gr = &grad_out.v[s * C];
    const double inv = 1.0 / spans_[s];
    for (int i = 0; i < spans_[s]; ++i, ++t) {
      double* dxr = &dx.v[static_cast<std::size_t>(t) * C];
      for (int c = 0; c < C; ++c) dxr[c] = gr[c] * inv;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Flatten

Tensor Flatten::forward(const Tensor& x, Mode) {
  require_shape(x.rank() >= 2, "flatten", x, "[first, rest...]");
  forward_done_ = true;
  cached_shape_ = x.shape;
  int rest = 1;
  for (std::size_t i = 1; i < x.shape.size(); ++i) rest *= x.shape[i];
  Tensor y({x.shape[0], rest}, x.v);
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  require_forward();
  return Tensor(cached_shape_, grad_out.v);
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::uint64_t seed) : rng_(seed) {}

Layer* Network::add(std::unique_ptr<Layer> layer) {
  layer->attach_rng(&rng_);
  layers_.push_back(std::move(layer));
  return layers_.back().get();
}

void Network::init_params() {
  for (auto& l : layers_) l->init(rng_);
}

Tensor Network::forward(const Tensor& x, Mode mode) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, mode);
  forward_recorded_ = true;
  return cur;
}

Tensor Network::backward(const Tensor& grad_out) {
  if (!forward_recorded_) {
    throw std::logic_error("network backward called before forward");
  }
  Tensor cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    cur = (*it)->backward(cur);
  }
  return cur;
}

void Network::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

std::vector<Layer*> Network::layers() {
  std::vector<Layer*> out;
  out.reserve(layers_.size());
  for (auto& l : layers_) out.push_back(l.get());
  return out;
}

nlohmann::json Network::to_json(bool full_precision) const {
  json layers = json::array();
  for (const auto& l : layers_) {
    json entry;
    entry["kind"] = l->kind();
    entry["hp"] = l->hyperparams();
    json params = json::array();
    for (double p : l->params()) {
      params.push_back(full_precision ? p
                                      : static_cast<double>(static_cast<float>(p)));
    }
    entry["params"] = std::move(params);
    layers.push_back(std::move(entry));
  }
  json j;
  j["layers"] = std::move(layers);
  json rng_state = json::array();
  for (auto s : rng_.state()) rng_state.push_back(s);
  j["rng_state"] = std::move(rng_state);
  return j;
}

Network Network::from_json(const nlohmann::json& j) {
  Network net(0);
  for (const auto& entry : j.at("layers")) {
    auto layer = make_layer(entry.at("kind").get<std::string>(),
                            entry.value("hp", json::object()));
    const auto& params = entry.at("params");
    if (params.size() != layer->params().size()) {
      throw DataError("checkpoint layer parameter count mismatch for " +
                      layer->kind());
    }
    for (std::size_t i = 0; i < layer->params().size(); ++i) {
      layer->params()[i] = params[i].get<double>();
    }
    net.add(std::move(layer));
  }
  if (j.contains("rng_state")) {
    std::array<std::uint64_t, 4> st{};
    for (int i = 0; i < 4; ++i) st[i] = j["rng_state"][i].get<std::uint64_t>();
    net.rng_.set_state(st);
  }
  return net;
}

std::unique_ptr<Layer> make_layer(const std::string& kind,
                                  const nlohmann::json& hp) {
  if (kind == "linear") {
    return std::make_unique<Linear>(hp.at("in").get<int>(),
                                    hp.at("out").get<int>());
  }
  if (kind == "conv1d") {
    return std::make_unique<Conv1d>(hp.at("in").get<int>(),
                                    hp.at("out").get<int>(),
                                    hp.at("kernel").get<int>());
  }
  if (kind == "conv2d") {
    return std::make_unique<Conv2d>(hp.at("in").get<int>(),
                                    hp.at("out").get<int>(),
                                    hp.at("kernel_h").get<int>(),
                                    hp.at("kernel_w").get<int>());
  }
  if (kind == "relu") return std::make_unique<Relu>();
  if (kind == "layer_norm") {
    return std::make_unique<LayerNorm>(hp.at("dim").get<int>());
  }
  if (kind == "dropout") {
    return std::make_unique<Dropout>(hp.at("rate").get<double>());
  }
  if (kind == "embedding_lookup") {
    return std::make_unique<EmbeddingLookup>(hp.at("vocab").get<int>(),
                                             hp.at("dim").get<int>());
  }
  if (kind == "token_mean_pool") return std::make_unique<TokenMeanPool>();
  if (kind == "flatten") return std::make_unique<Flatten>();
  throw ConfigError("unknown layer kind: " + kind);
}

}  // namespace prosody::nn
