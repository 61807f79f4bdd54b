#ifndef PROSODY_REF_ENCODER_HPP_
#define PROSODY_REF_ENCODER_HPP_

#include <memory>
#include <vector>

#include "json.hpp"
#include "prosody/labels.hpp"
#include "prosody/layers.hpp"
#include "prosody/mel.hpp"
#include "prosody/optimizer.hpp"
#include "prosody/vq.hpp"

namespace prosody::vq {

struct RefEncoderConfig {
  int n_mels = 80;
  int conv_channels = 32;
  int conv_kernel = 3;
  int hidden_dim = 64;
  int latent_dim = 3;
  double dropout = 0.2;
  int codebook_size = 256;
  double beta = 0.25;            // commitment coefficient
  int quant_warmup_steps = 500;  // steps trained without quantization
  int reseed_interval = 500;     // dead-codeword reseed cadence, in steps

  nlohmann::json to_json() const;
  static RefEncoderConfig from_json(const nlohmann::json& j);
};

// Mel -> conv stack -> per-frame flatten -> token mean pool -> two linear
// projections into the latent space. Token spans come from the forced
// alignment at the chosen level.
class RefEncoder {
 public:
  RefEncoder(const RefEncoderConfig& cfg, std::uint64_t seed);

  // [tokens, latent_dim] latents; spans are frame counts summing to the mel
  // frame count.
  nn::Tensor encode(const MelSpectrogram& mel, const std::vector<int>& spans,
                    nn::Mode mode);

  nn::Network& net() { return *net_; }
  const RefEncoderConfig& config() const { return cfg_; }

  nlohmann::json to_json(bool full_precision) const;
  static RefEncoder from_json(const nlohmann::json& j);

 private:
  RefEncoder() = default;

  RefEncoderConfig cfg_;
  std::unique_ptr<nn::Network> net_;
  nn::TokenMeanPool* pool_ = nullptr;
};

struct RefTrainSample {
  MelSpectrogram mel;
  std::vector<int> spans;
};

struct LossCurvePoint {
  int step = 0;
  double total = 0.0;
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
};

struct RefTrainReport {
  std::vector<LossCurvePoint> curve;
  std::vector<double> perplexity_per_epoch;
  double step0_loss = 0.0;
  double final_loss = 0.0;
  bool collapse_warning = false;  // final perplexity < 2
};

struct TrainedRefEncoder {
  std::unique_ptr<RefEncoder> encoder;
  Codebook codebook;
  std::unique_ptr<nn::Network> decoder;  // proxy reconstruction head
  RefTrainReport report;
};

// Trains encoder + codebook against the proxy objective: a linear decoder
// reconstructs each token's mean mel vector from the quantized latent, with
// the VQ loss pair pulling latents and codewords together. Straight-through
// gradients reach the encoder; the codebook only learns from codebook_loss.
TrainedRefEncoder train_reference_encoder(
    const std::vector<RefTrainSample>& dataset, const RefEncoderConfig& cfg,
    const nn::TrainConfig& train_cfg);

// Frozen-encoder label extraction (eval mode, deterministic).
std::vector<NeuralLabel> extract_neural_labels(RefEncoder& encoder,
                                               const Codebook& codebook,
                                               const MelSpectrogram& mel,
                                               const std::vector<int>& spans);

}  // namespace prosody::vq

#endif  // PROSODY_REF_ENCODER_HPP_
