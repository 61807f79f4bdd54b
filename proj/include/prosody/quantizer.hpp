#ifndef PROSODY_QUANTIZER_HPP_
#define PROSODY_QUANTIZER_HPP_

#include <string>
#include <vector>

namespace prosody {

enum class QuantizerScale { linear, log };

std::string to_string(QuantizerScale scale);
QuantizerScale quantizer_scale_from_string(const std::string& s);

// Equal-width binning between the fitted min and max on the chosen scale.
// Out-of-range values clamp to the edge bins, so applying a quantizer fitted
// on a training split never fails on unseen data.
class Quantizer {
 public:
  Quantizer() = default;
  Quantizer(int n_bins, QuantizerScale scale, double fitted_min,
            double fitted_max);

  // Fits bin boundaries from observed values. On the log scale only positive
  // values participate (F0 uses 0 as the unvoiced sentinel; it clamps to bin
  // 0 at apply time). Throws DataError when fewer than two distinct finite
  // values remain.
  static Quantizer fit(const std::vector<double>& values, int n_bins,
                       QuantizerScale scale);

  int quantize(double v) const;      // throws DataError on non-finite input
  double dequantize(int bin) const;  // bin center, in the original domain

  int n_bins() const { return n_bins_; }
  QuantizerScale scale() const { return scale_; }
  double fitted_min() const { return min_; }
  double fitted_max() const { return max_; }
  // width of one bin in the transformed (scale) domain
  double bin_width() const;

  std::string to_json() const;
  static Quantizer from_json(const std::string& text);
  void save(const std::string& path) const;
  static Quantizer load(const std::string& path);

 private:
  double transform(double v) const;
  double untransform(double v) const;

  int n_bins_ = 0;
  QuantizerScale scale_ = QuantizerScale::linear;
  double min_ = 0.0;  // original domain
  double max_ = 0.0;
};

}  // namespace prosody

#endif  // PROSODY_QUANTIZER_HPP_
