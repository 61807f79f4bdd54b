#include "prosody/vq.hpp"

#include <cmath>
#include <limits>

#include "prosody/error.hpp"

namespace prosody::vq {

using nlohmann::json;

Codebook::Codebook(int size_, int dim_) : size(size_), dim(dim_) {
  if (size <= 0 || dim <= 0) throw ConfigError("codebook dims must be positive");
  w.assign(static_cast<std::size_t>(size) * dim, 0.0);
}

json Codebook::to_json(bool full_precision) const {
  json arr = json::array();
  for (double x : w) {
    arr.push_back(full_precision ? x
                                 : static_cast<double>(static_cast<float>(x)));
  }
  return {{"size", size}, {"dim", dim}, {"w", std::move(arr)}};
}

Codebook Codebook::from_json(const json& j) {
  Codebook cb(j.at("size").get<int>(), j.at("dim").get<int>());
  const auto& arr = j.at("w");
  if (arr.size() != cb.w.size()) {
    throw DataError("codebook value count mismatch");
  }
  for (std::size_t i = 0; i < cb.w.size(); ++i) cb.w[i] = arr[i].get<double>();
  return cb;
}

QuantizeResult quantize_latent(std::span<const double> z, const Codebook& cb) {
  if (static_cast<int>(z.size()) != cb.dim) {
    throw DataError("latent dimension does not match codebook");
  }
  for (double v : z) {
    if (!std::isfinite(v)) throw DataError("cannot quantize non-finite latent");
  }
  QuantizeResult best;
  best.distance_sq = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cb.size; ++i) {
    const double* c = cb.row(i);
    double d = 0.0;
    for (int k = 0; k < cb.dim; ++k) {
      const double diff = z[k] - c[k];
      d += diff * diff;
    }
    if (d < best.distance_sq) {
      best.distance_sq = d;
      best.index = i;
    }
  }
  best.codeword.assign(cb.row(best.index), cb.row(best.index) + cb.dim);
  return best;
}

VqLossTerms vq_loss(std::span<const double> z, std::span<const double> codeword,
                    double beta) {
  if (z.size() != codeword.size()) {
    throw DataError("latent/codeword dimension mismatch");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double diff = z[k] - codeword[k];
    d += diff * diff;
  }
  // Both terms are the same squared distance; they differ only in which side
  // the gradient reaches (stop-gradient placement).
  return VqLossTerms{d, d, beta};
}

double perplexity(const std::vector<long>& usage_counts) {
  long total = 0;
  for (long c : usage_counts) total += c;
  if (total == 0) return 0.0;
  double entropy = 0.0;
  for (long c : usage_counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

std::vector<double> kmeans(const std::vector<double>& points, int n, int dim,
                           int k, int iterations, Rng& rng) {
  if (n <= 0 || static_cast<std::size_t>(n) * dim != points.size()) {
    throw DataError("kmeans: bad point matrix");
  }
  std::vector<double> centers(static_cast<std::size_t>(k) * dim);
  // k-means++ seeding: next center drawn with probability proportional to
  // the squared distance from the nearest chosen center
  auto copy_point = [&](int c, int src, bool jitter) {
    for (int d = 0; d < dim; ++d) {
      double v = points[static_cast<std::size_t>(src) * dim + d];
      if (jitter) v += rng.uniform(-0.01, 0.01);
      centers[static_cast<std::size_t>(c) * dim + d] = v;
    }
  };
  copy_point(0, static_cast<int>(rng.below(n)), false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = 0.0;
      for (int dd = 0; dd < dim; ++dd) {
        const double diff =
            points[static_cast<std::size_t>(i) * dim + dd] -
            centers[static_cast<std::size_t>(c - 1) * dim + dd];
        d += diff * diff;
      }
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    int src = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          src = i;
          break;
        }
      }
    } else {
      src = static_cast<int>(rng.below(n));
    }
    copy_point(c, src, n < k);
  }
  std::vector<int> assign(n, 0);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<int> counts(k);
  for (int it = 0; it < iterations; ++it) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        double d2 = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double diff = points[static_cast<std::size_t>(i) * dim + d] -
                              centers[static_cast<std::size_t>(c) * dim + d];
          d2 += diff * diff;
        }
        if (d2 < best) {
          best = d2;
          arg = c;
        }
      }
      assign[i] = arg;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (int d = 0; d < dim; ++d) {
        sums[static_cast<std::size_t>(assign[i]) * dim + d] +=
            points[static_cast<std::size_t>(i) * dim + d];
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // empty cluster: reseed at a random point
        const int src = static_cast<int>(rng.below(n));
        for (int d = 0; d < dim; ++d) {
          centers[static_cast<std::size_t>(c) * dim + d] =
              points[static_cast<std::size_t>(src) * dim + d] +
              rng.uniform(-0.01, 0.01);
        }
      } else {
        for (int d = 0; d < dim; ++d) {
          centers[static_cast<std::size_t>(c) * dim + d] =
              sums[static_cast<std::size_t>(c) * dim + d] / counts[c];
        }
      }
    }
  }
  return centers;
}

}  // namespace prosody::vq
