#include "support/signals.hpp"

#include <cmath>

namespace prosody::testsig {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

AudioBuffer sine(double freq_hz, double seconds, int sample_rate,
                 double amplitude) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  const int n = static_cast<int>(seconds * sample_rate);
  a.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    a.samples[i] = amplitude * std::sin(kTwoPi * freq_hz * i / sample_rate);
  }
  return a;
}

AudioBuffer silence(double seconds, int sample_rate) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  a.samples.assign(static_cast<int>(seconds * sample_rate), 0.0);
  return a;
}

AudioBuffer sawtooth_sweep(double f0, double f1, double seconds,
                           int sample_rate, double amplitude,
                           int n_harmonics) {
  AudioBuffer a;
  a.sample_rate = sample_rate;
  const int n = static_cast<int>(seconds * sample_rate);
  a.samples.assign(n, 0.0);
  // phase(t) = 2*pi * (f0*t + (f1-f0)/(2*seconds) * t^2)
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double phase = kTwoPi * (f0 * t + (f1 - f0) / (2.0 * seconds) * t * t);
    double v = 0.0;
    for (int h = 1; h <= n_harmonics; ++h) {
      v += std::sin(h * phase) / h;
    }
    a.samples[i] = amplitude * v * (2.0 / kTwoPi) * 2.0;
  }
  return a;
}

AudioBuffer sawtooth(double freq_hz, double seconds, int sample_rate,
                     double amplitude, int n_harmonics) {
  return sawtooth_sweep(freq_hz, freq_hz, seconds, sample_rate, amplitude,
                        n_harmonics);
}

}  // namespace prosody::testsig
