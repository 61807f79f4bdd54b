#include "prosody/mel.hpp"

#include <cmath>

#include "prosody/error.hpp"

namespace prosody {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

}  // namespace

std::vector<double> mel_filterbank(const MelConfig& cfg, int fft_size,
                                   int sample_rate) {
  if (cfg.n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (cfg.fmax > sample_rate / 2.0) {
    throw ConfigError("mel fmax exceeds Nyquist frequency");
  }
  if (cfg.fmin < 0.0 || cfg.fmin >= cfg.fmax) {
    throw ConfigError("mel range must satisfy 0 <= fmin < fmax");
  }
  const int n_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }

  std::vector<double> bank(static_cast<std::size_t>(cfg.n_mels) * n_bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        w = (right - f) / (right - center);
      }
      bank[static_cast<std::size_t>(m) * n_bins + k] = w;
    }
  }
  return bank;
}

MelSpectrogram mel_spectrogram(const Spectrogram& spec, const MelConfig& cfg) {
  const auto bank = mel_filterbank(cfg, spec.config.fft_size, spec.sample_rate);
  const int n_bins = spec.n_bins;
  MelSpectrogram mel;
  mel.n_frames = spec.n_frames;
  mel.n_mels = cfg.n_mels;
  mel.config = cfg;
  mel.frames.resize(static_cast<std::size_t>(spec.n_frames) * cfg.n_mels);
  for (int t = 0; t < spec.n_frames; ++t) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* w = &bank[static_cast<std::size_t>(m) * n_bins];
      for (int k = 0; k < n_bins; ++k) acc += w[k] * spec.at(t, k);
      if (cfg.log_compress) {
        acc = std::log(acc < cfg.log_floor ? cfg.log_floor : acc);
      }
      mel.at(t, m) = acc;
    }
  }
  return mel;
}

}  // namespace prosody
