#ifndef PROSODY_MEL_HPP_
#define PROSODY_MEL_HPP_

#include <vector>

#include "prosody/stft.hpp"

namespace prosody {

struct MelConfig {
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  bool log_compress = true;
  double log_floor = 1e-5;  // applied before log so silence stays finite
};

struct MelSpectrogram {
  int n_frames = 0;
  int n_mels = 0;
  std::vector<double> frames;  // row-major [n_frames, n_mels]
  MelConfig config;

  double at(int t, int m) const {
    return frames[static_cast<std::size_t>(t) * n_mels + m];
  }
  double& at(int t, int m) {
    return frames[static_cast<std::size_t>(t) * n_mels + m];
  }
};

// Triangular filterbank, rows are filters over fft_size/2+1 bins.
std::vector<double> mel_filterbank(const MelConfig& cfg, int fft_size,
                                   int sample_rate);

// Throws ConfigError when fmax exceeds Nyquist.
MelSpectrogram mel_spectrogram(const Spectrogram& spec, const MelConfig& cfg);

}  // namespace prosody

#endif  // PROSODY_MEL_HPP_
