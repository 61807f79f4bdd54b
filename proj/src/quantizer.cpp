#include "prosody/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "prosody/error.hpp"

namespace prosody {

using nlohmann::json;

std::string to_string(QuantizerScale scale) {
  return scale == QuantizerScale::linear ? "linear" : "log";
}

QuantizerScale quantizer_scale_from_string(const std::string& s) {
  if (s == "linear") return QuantizerScale::linear;
  if (s == "log") return QuantizerScale::log;
  throw ConfigError("unknown quantizer scale: " + s);
}

Quantizer::Quantizer(int n_bins, QuantizerScale scale, double fitted_min,
                     double fitted_max)
    : n_bins_(n_bins), scale_(scale), min_(fitted_min), max_(fitted_max) {
  if (n_bins_ < 2) throw ConfigError("quantizer needs at least 2 bins");
  if (!(min_ < max_)) throw DataError("quantizer range is degenerate");
  if (scale_ == QuantizerScale::log && min_ <= 0.0) {
    throw DataError("log-scale quantizer needs a positive minimum");
  }
}

Quantizer Quantizer::fit(const std::vector<double>& values, int n_bins,
                         QuantizerScale scale) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    if (scale == QuantizerScale::log && v <= 0.0) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo < hi)) {
    throw DataError("quantizer fit needs at least two distinct finite values");
  }
  return Quantizer(n_bins, scale, lo, hi);
}

double Quantizer::transform(double v) const {
  return scale_ == QuantizerScale::log ? std::log(v) : v;
}

double Quantizer::untransform(double v) const {
  return scale_ == QuantizerScale::log ? std::exp(v) : v;
}

double Quantizer::bin_width() const {
  return (transform(max_) - transform(min_)) / n_bins_;
}

int Quantizer::quantize(double v) const {
  if (!std::isfinite(v)) throw DataError("cannot quantize non-finite value");
  if (v <= min_) return 0;  // also catches the log-scale 0 sentinel
  if (v >= max_) return n_bins_ - 1;
  const double t0 = transform(min_);
  const int bin = static_cast<int>((transform(v) - t0) / bin_width());
  return std::clamp(bin, 0, n_bins_ - 1);
}

double Quantizer::dequantize(int bin) const {
  if (bin < 0 || bin >= n_bins_) throw DataError("bin index out of range");
  const double t0 = transform(min_);
  return untransform(t0 + (bin + 0.5) * bin_width());
}

std::string Quantizer::to_json() const {
  json j;
  j["n_bins"] = n_bins_;
  j["scale"] = to_string(scale_);
  j["min"] = min_;
  j["max"] = max_;
  return j.dump(2) + "\n";
}

Quantizer Quantizer::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("quantizer JSON parse failure: ") + e.what());
  }
  return Quantizer(j.at("n_bins").get<int>(),
                   quantizer_scale_from_string(j.at("scale").get<std::string>()),
                   j.at("min").get<double>(), j.at("max").get<double>());
}

void Quantizer::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write quantizer file: " + path);
  out << to_json();
}

Quantizer Quantizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open quantizer file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace prosody
