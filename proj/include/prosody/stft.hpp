#ifndef PROSODY_STFT_HPP_
#define PROSODY_STFT_HPP_

#include <vector>

#include "prosody/audio.hpp"

namespace prosody {

// Non-centered, no-padding framing with a Hann window. With these settings
// the frame count is exactly 1 + floor((n_samples - frame_length) / hop).
struct FrameConfig {
  int frame_length = 1024;
  int hop_length = 256;
  int fft_size = 1024;
};

void validate(const FrameConfig& cfg);

// Throws DataError when the signal is shorter than one frame.
int frame_count(std::size_t n_samples, const FrameConfig& cfg);

struct Spectrogram {
  int n_frames = 0;
  int n_bins = 0;  // fft_size / 2 + 1
  std::vector<double> mag;  // row-major [n_frames, n_bins]
  FrameConfig config;
  int sample_rate = 0;

  double at(int t, int k) const { return mag[static_cast<std::size_t>(t) * n_bins + k]; }
};

Spectrogram stft(const AudioBuffer& audio, const FrameConfig& cfg);

// L2 norm of each frame's magnitude spectrum.
std::vector<double> frame_energy(const Spectrogram& spec);

}  // namespace prosody

#endif  // PROSODY_STFT_HPP_
