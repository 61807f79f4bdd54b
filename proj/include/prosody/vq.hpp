#ifndef PROSODY_VQ_HPP_
#define PROSODY_VQ_HPP_

#include <span>
#include <vector>

#include "json.hpp"
#include "prosody/rng.hpp"

namespace prosody::vq {

// Fixed-size codeword table with nearest-neighbor semantics.
struct Codebook {
  int size = 256;
  int dim = 3;
  std::vector<double> w;  // row-major [size, dim]

  Codebook() = default;
  Codebook(int size_, int dim_);

  const double* row(int i) const {
    return &w[static_cast<std::size_t>(i) * dim];
  }
  double* row(int i) { return &w[static_cast<std::size_t>(i) * dim]; }

  nlohmann::json to_json(bool full_precision) const;
  static Codebook from_json(const nlohmann::json& j);
};

struct QuantizeResult {
  int index = 0;
  std::vector<double> codeword;
  double distance_sq = 0.0;
};

// argmin_i ||z - codeword_i||_2, ties broken toward the lowest index.
QuantizeResult quantize_latent(std::span<const double> z, const Codebook& cb);

struct VqLossTerms {
  double codebook_loss = 0.0;    // ||stopgrad(z) - codeword||^2
  double commitment_loss = 0.0;  // ||z - stopgrad(codeword)||^2
  double beta = 0.25;
};

VqLossTerms vq_loss(std::span<const double> z, std::span<const double> codeword,
                    double beta);

// exp(entropy) of a codeword usage histogram; size when uniform, ~1 when
// collapsed.
double perplexity(const std::vector<long>& usage_counts);

// Lloyd iterations with seeded initialization; used to bootstrap the
// codebook from warm-up latents. points is [n, dim] row-major.
std::vector<double> kmeans(const std::vector<double>& points, int n, int dim,
                           int k, int iterations, Rng& rng);

}  // namespace prosody::vq

#endif  // PROSODY_VQ_HPP_
