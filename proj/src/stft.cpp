#include "prosody/stft.hpp"

#include <cmath>

#include "prosody/error.hpp"
#include "prosody/fft.hpp"

namespace prosody {

void validate(const FrameConfig& cfg) {
  if (cfg.hop_length <= 0 || cfg.hop_length > cfg.frame_length ||
      cfg.frame_length > cfg.fft_size) {
    throw ConfigError("frame config must satisfy 0 < hop <= frame <= fft");
  }
}

int frame_count(std::size_t n_samples, const FrameConfig& cfg) {
  validate(cfg);
  if (n_samples < static_cast<std::size_t>(cfg.frame_length)) {
    throw DataError("audio shorter than one frame");
  }
  return 1 + static_cast<int>((n_samples - cfg.frame_length) / cfg.hop_length);
}

Spectrogram stft(const AudioBuffer& audio, const FrameConfig& cfg) {
  validate(audio);
  const int T = frame_count(audio.samples.size(), cfg);
  const int n_bins = cfg.fft_size / 2 + 1;

  std::vector<double> window(cfg.frame_length);
  for (int i = 0; i < cfg.frame_length; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * 3.141592653589793 * i /
                                     cfg.frame_length);
  }

  Spectrogram spec;
  spec.n_frames = T;
  spec.n_bins = n_bins;
  spec.config = cfg;
  spec.sample_rate = audio.sample_rate;
  spec.mag.resize(static_cast<std::size_t>(T) * n_bins);

  std::vector<double> frame(cfg.frame_length);
  for (int t = 0; t < T; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.hop_length;
    for (int i = 0; i < cfg.frame_length; ++i) {
      frame[i] = audio.samples[off + i] * window[i];
    }
    const auto bins = rfft(frame, cfg.fft_size);
    for (int k = 0; k < n_bins; ++k) {
      spec.mag[static_cast<std::size_t>(t) * n_bins + k] = std::abs(bins[k]);
    }
  }
  return spec;
}

std::vector<double> frame_energy(const Spectrogram& spec) {
  std::vector<double> energy(spec.n_frames);
  for (int t = 0; t < spec.n_frames; ++t) {
    double sum = 0.0;
    for (int k = 0; k < spec.n_bins; ++k) {
      const double m = spec.at(t, k);
      sum += m * m;
    }
    energy[t] = std::sqrt(sum);
  }
  return energy;
}

}  // namespace prosody
