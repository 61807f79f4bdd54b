#include "prosody/ref_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prosody/error.hpp"

namespace prosody::vq {

using nlohmann::json;
using nn::Mode;
using nn::Network;
using nn::Tensor;

json RefEncoderConfig::to_json() const {
  return {{"n_mels", n_mels},
          {"conv_channels", conv_channels},
          {"conv_kernel", conv_kernel},
          {"hidden_dim", hidden_dim},
          {"latent_dim", latent_dim},
          {"dropout", dropout},
          {"codebook_size", codebook_size},
          {"beta", beta},
          {"quant_warmup_steps", quant_warmup_steps},
          {"reseed_interval", reseed_interval}};
}

RefEncoderConfig RefEncoderConfig::from_json(const json& j) {
  RefEncoderConfig cfg;
  cfg.n_mels = j.value("n_mels", cfg.n_mels);
  cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
  cfg.conv_kernel = j.value("conv_kernel", cfg.conv_kernel);
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.codebook_size = j.value("codebook_size", cfg.codebook_size);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.quant_warmup_steps = j.value("quant_warmup_steps", cfg.quant_warmup_steps);
  cfg.reseed_interval = j.value("reseed_interval", cfg.reseed_interval);
  return cfg;
}

RefEncoder::RefEncoder(const RefEncoderConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), net_(std::make_unique<Network>(seed)) {
  const int k = cfg.conv_kernel;
  net_->emplace<nn::Conv2d>(1, cfg.conv_channels, k, k);
  net_->emplace<nn::Relu>();
  net_->emplace<nn::Dropout>(cfg.dropout);
  net_->emplace<nn::Conv2d>(cfg.conv_channels, cfg.conv_channels, k, k);
  net_->emplace<nn::Relu>();
  net_->emplace<nn::Dropout>(cfg.dropout);
  net_->emplace<nn::Flatten>();
  pool_ = net_->emplace<nn::TokenMeanPool>();
  net_->emplace<nn::Linear>(cfg.n_mels * cfg.conv_channels, cfg.hidden_dim);
  net_->emplace<nn::Relu>();
  net_->emplace<nn::Dropout>(cfg.dropout);
  net_->emplace<nn::Linear>(cfg.hidden_dim, cfg.latent_dim);
  net_->emplace<nn::Dropout>(cfg.dropout);
  net_->init_params();
}

Tensor RefEncoder::encode(const MelSpectrogram& mel,
                          const std::vector<int>& spans, Mode mode) {
  if (mel.n_mels != cfg_.n_mels) {
    throw DataError("mel dimensionality does not match reference encoder");
  }
  int total = 0;
  for (int s : spans) total += s;
  if (total != mel.n_frames) {
    throw DataError("alignment durations do not sum to mel frame count");
  }
  pool_->set_spans(spans);
  Tensor x({mel.n_frames, mel.n_mels, 1}, mel.frames);
  return net_->forward(x, mode);
}

json RefEncoder::to_json(bool full_precision) const {
  json j;
  j["config"] = cfg_.to_json();
  j["net"] = net_->to_json(full_precision);
  return j;
}

RefEncoder RefEncoder::from_json(const json& j) {
  RefEncoder enc;
  enc.cfg_ = RefEncoderConfig::from_json(j.at("config"));
  enc.net_ = std::make_unique<Network>(Network::from_json(j.at("net")));
  // the pool sits between flatten and the first linear
  for (auto* layer : enc.net_->layers()) {
    if (layer->kind() == "token_mean_pool") {
      enc.pool_ = static_cast<nn::TokenMeanPool*>(layer);
    }
  }
  if (enc.pool_ == nullptr) {
    throw DataError("reference encoder checkpoint is missing its pool layer");
  }
  return enc;
}

namespace {

// Token-mean mel vectors, the proxy reconstruction target.
Tensor token_mean_mel(const MelSpectrogram& mel, const std::vector<int>& spans) {
  Tensor out({static_cast<int>(spans.size()), mel.n_mels});
  int t = 0;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    for (int i = 0; i < spans[s]; ++i, ++t) {
      for (int m = 0; m < mel.n_mels; ++m) {
        out.at(static_cast<int>(s), m) += mel.at(t, m);
      }
    }
    for (int m = 0; m < mel.n_mels; ++m) {
      out.at(static_cast<int>(s), m) /= spans[s];
    }
  }
  return out;
}

}  // namespace

TrainedRefEncoder train_reference_encoder(
    const std::vector<RefTrainSample>& dataset, const RefEncoderConfig& cfg,
    const nn::TrainConfig& train_cfg) {
  if (dataset.empty()) throw DataError("reference encoder needs training data");
  train_cfg.validate();

  TrainedRefEncoder out;
  out.encoder = std::make_unique<RefEncoder>(cfg, train_cfg.rng_seed);
  out.decoder = std::make_unique<Network>(train_cfg.rng_seed + 1);
  out.decoder->emplace<nn::Linear>(cfg.latent_dim, cfg.n_mels);
  out.decoder->init_params();
  out.codebook = Codebook(cfg.codebook_size, cfg.latent_dim);

  // codebook wrapped as an embedding table so Adam and scatter-grads reuse
  // the layer machinery
  Network cb_net(train_cfg.rng_seed + 2);
  auto* cb_layer =
      cb_net.emplace<nn::EmbeddingLookup>(cfg.codebook_size, cfg.latent_dim);

  nn::AdamOptimizer model_opt;
  model_opt.register_layers(out.encoder->net().layers());
  model_opt.register_layers(out.decoder->layers());
  nn::AdamOptimizer cb_opt;
  cb_opt.register_layers(cb_net.layers());

  Rng loop_rng(train_cfg.rng_seed + 3);
  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int cursor = n;  // forces a shuffle on first use

  std::vector<Tensor> targets;
  targets.reserve(n);
  for (const auto& s : dataset) targets.push_back(token_mean_mel(s.mel, s.spans));

  bool codebook_ready = false;
  std::vector<long> usage(cfg.codebook_size, 0);
  std::vector<long> epoch_usage(cfg.codebook_size, 0);
  const int steps_per_epoch = std::max(1, n / train_cfg.batch_size);

  auto maybe_init_codebook = [&]() {
    // k-means over eval-mode latents of the whole training set
    std::vector<double> points;
    int count = 0;
    for (const auto& s : dataset) {
      const Tensor z = out.encoder->encode(s.mel, s.spans, Mode::eval);
      points.insert(points.end(), z.v.begin(), z.v.end());
      count += z.dim(0);
    }
    out.codebook.w = kmeans(points, count, cfg.latent_dim, cfg.codebook_size,
                            20, loop_rng);
    cb_layer->params() = out.codebook.w;
    codebook_ready = true;
  };

  for (int step = 1; step <= train_cfg.total_steps; ++step) {
    const bool quantize = step > cfg.quant_warmup_steps;
    if (quantize && !codebook_ready) maybe_init_codebook();

    out.encoder->net().zero_grad();
    out.decoder->zero_grad();
    cb_net.zero_grad();

    // batch loss = mean over utterances of per-utterance means; gradients
    // are scaled at accumulation time so every term lands at its own scale
    double recon_loss = 0.0, cb_loss = 0.0, commit_loss = 0.0;
    const int batch = std::min(train_cfg.batch_size, n);
    const double inv_batch = 1.0 / batch;
    std::vector<double> latest_latents;  // reseed pool for dead codewords

    for (int b = 0; b < batch; ++b) {
      if (cursor >= n) {
        for (int i = n - 1; i > 0; --i) {
          std::swap(order[i], order[static_cast<int>(loop_rng.below(i + 1))]);
        }
        cursor = 0;
      }
      const int idx = order[cursor++];
      const auto& sample = dataset[idx];
      const Tensor& target = targets[idx];

      const Tensor z =
          out.encoder->encode(sample.mel, sample.spans, Mode::train);
      const int n_tok = z.dim(0);
      latest_latents.insert(latest_latents.end(), z.v.begin(), z.v.end());
      const double mel_scale = inv_batch / (static_cast<double>(n_tok) * cfg.n_mels);
      const double tok_scale = inv_batch / static_cast<double>(n_tok);

      Tensor decoder_in = z;
      std::vector<int> assignments;
      if (quantize) {
        assignments.resize(n_tok);
        for (int t = 0; t < n_tok; ++t) {
          const auto q = quantize_latent(
              std::span<const double>(&z.v[static_cast<std::size_t>(t) *
                                           cfg.latent_dim],
                                      cfg.latent_dim),
              out.codebook);
          assignments[t] = q.index;
          ++usage[q.index];
          ++epoch_usage[q.index];
          for (int k = 0; k < cfg.latent_dim; ++k) {
            decoder_in.v[static_cast<std::size_t>(t) * cfg.latent_dim + k] =
                q.codeword[k];
          }
          const auto terms = vq_loss(
              std::span<const double>(&z.v[static_cast<std::size_t>(t) *
                                           cfg.latent_dim],
                                      cfg.latent_dim),
              std::span<const double>(q.codeword.data(), cfg.latent_dim),
              cfg.beta);
          cb_loss += terms.codebook_loss * tok_scale;
          commit_loss += terms.commitment_loss * tok_scale;
        }
      }

      const Tensor recon = out.decoder->forward(decoder_in, Mode::train);
      Tensor d_recon(recon.shape);
      for (std::size_t i = 0; i < recon.v.size(); ++i) {
        const double diff = recon.v[i] - target.v[i];
        recon_loss += diff * diff * mel_scale;
        d_recon.v[i] = 2.0 * diff * mel_scale;
      }
      // gradient of the decoder path w.r.t. its input; passes straight
      // through the quantizer to the encoder latents
      Tensor dz = out.decoder->backward(d_recon);
      if (quantize) {
        // commitment term pulls z toward its (frozen) codeword
        for (int t = 0; t < n_tok; ++t) {
          for (int k = 0; k < cfg.latent_dim; ++k) {
            const std::size_t at =
                static_cast<std::size_t>(t) * cfg.latent_dim + k;
            dz.v[at] +=
                2.0 * cfg.beta * (z.v[at] - decoder_in.v[at]) * tok_scale;
          }
        }
        // codebook term pulls codewords toward the (frozen) latents
        Tensor ids({n_tok});
        for (int t = 0; t < n_tok; ++t) ids.v[t] = assignments[t];
        const Tensor cw = cb_net.forward(ids, Mode::train);
        Tensor d_cw(cw.shape);
        for (std::size_t i = 0; i < cw.v.size(); ++i) {
          d_cw.v[i] = 2.0 * (cw.v[i] - z.v[i]) * tok_scale;
        }
        cb_net.backward(d_cw);
      }
      out.encoder->net().backward(dz);
    }

    const double total = recon_loss + cb_loss + cfg.beta * commit_loss;
    if (!std::isfinite(total)) {
      throw NumericError("reference encoder loss diverged at step " +
                         std::to_string(step));
    }

    out.report.curve.push_back(
        {step, total, recon_loss, cb_loss, commit_loss});
    if (step == 1) out.report.step0_loss = total;

    model_opt.step(train_cfg, step);
    if (quantize) {
      cb_opt.step(train_cfg, step);
      out.codebook.w = cb_layer->params();

      if (cfg.reseed_interval > 0 && step % cfg.reseed_interval == 0) {
        const int latent_count =
            static_cast<int>(latest_latents.size()) / cfg.latent_dim;
        for (int c = 0; c < cfg.codebook_size; ++c) {
          if (usage[c] != 0 || latent_count == 0) continue;
          const int src = static_cast<int>(loop_rng.below(latent_count));
          for (int k = 0; k < cfg.latent_dim; ++k) {
            cb_layer->params()[static_cast<std::size_t>(c) * cfg.latent_dim +
                               k] =
                latest_latents[static_cast<std::size_t>(src) * cfg.latent_dim +
                               k] +
                loop_rng.uniform(-0.01, 0.01);
          }
        }
        out.codebook.w = cb_layer->params();
        std::fill(usage.begin(), usage.end(), 0);
      }
    }

    if (step % steps_per_epoch == 0) {
      out.report.perplexity_per_epoch.push_back(perplexity(epoch_usage));
      std::fill(epoch_usage.begin(), epoch_usage.end(), 0);
    }
  }

  const int tail = std::min<int>(5, static_cast<int>(out.report.curve.size()));
  double acc = 0.0;
  for (int i = 0; i < tail; ++i) {
    acc += out.report.curve[out.report.curve.size() - 1 - i].total;
  }
  out.report.final_loss = acc / tail;
  if (!out.report.perplexity_per_epoch.empty() &&
      out.report.perplexity_per_epoch.back() < 2.0) {
    out.report.collapse_warning = true;
  }
  return out;
}

std::vector<NeuralLabel> extract_neural_labels(RefEncoder& encoder,
                                               const Codebook& codebook,
                                               const MelSpectrogram& mel,
                                               const std::vector<int>& spans) {
  const Tensor z = encoder.encode(mel, spans, Mode::eval);
  const int dim = encoder.config().latent_dim;
  std::vector<NeuralLabel> labels;
  labels.reserve(spans.size());
  for (int t = 0; t < z.dim(0); ++t) {
    const auto q = quantize_latent(
        std::span<const double>(&z.v[static_cast<std::size_t>(t) * dim], dim),
        codebook);
    NeuralLabel label;
    label.codeword = q.index;
    for (int k = 0; k < 3 && k < dim; ++k) label.latent[k] = q.codeword[k];
    labels.push_back(label);
  }
  return labels;
}

}  // namespace prosody::vq
