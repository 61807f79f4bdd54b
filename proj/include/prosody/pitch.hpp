#ifndef PROSODY_PITCH_HPP_
#define PROSODY_PITCH_HPP_

#include <cstdint>
#include <vector>

#include "prosody/stft.hpp"

namespace prosody {

struct PitchConfig {
  double f0_floor = 71.0;
  double f0_ceil = 800.0;
  // Frame is voiced when the periodicity-stability score clears this value.
  double voicing_threshold = 0.1;
  // Frames whose RMS is below this level are always unvoiced.
  double silence_floor_db = -60.0;
  int channels_per_octave = 2;
};

void validate(const PitchConfig& cfg, int sample_rate);

// Per-frame F0/voicing/energy series of one utterance. f0[t] > 0 iff
// voiced[t]; energy may be empty when a producer only fills pitch.
struct FrameTrack {
  std::vector<double> f0;
  std::vector<std::uint8_t> voiced;
  std::vector<double> energy;

  int size() const { return static_cast<int>(f0.size()); }
};

// Multi-band interval-based F0 estimation. Each band low-pass filters the
// signal near one candidate octave; zero-crossing, peak, and dip intervals of
// the filtered signal give four period estimates per frame, and the band whose
// estimates agree best wins. Frames with unstable estimates, out-of-range
// candidates, or near-silent content are marked unvoiced (f0 = 0).
// Frame timing matches stft() with the same FrameConfig.
FrameTrack estimate_f0(const AudioBuffer& audio, const FrameConfig& frames,
                       const PitchConfig& cfg);

}  // namespace prosody

#endif  // PROSODY_PITCH_HPP_
