#include "prosody/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prosody/error.hpp"
#include "prosody/fft.hpp"

namespace prosody {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kHuge = std::numeric_limits<double>::max();

// Interval events of one detector: freq estimates at their time locations.
struct EventSeries {
  std::vector<double> locations;  // seconds
  std::vector<double> freqs;      // Hz
};

// Sub-sample zero crossings (positive to negative) of x. Each successive pair
// of crossings yields one interval: frequency fs/len at the midpoint.
EventSeries crossings(const std::vector<double>& x, double fs) {
  std::vector<double> fine;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i] > 0.0 && x[i + 1] <= 0.0) {
      const std::size_t e = i + 1;
      fine.push_back(static_cast<double>(e) - x[e - 1] / (x[e] - x[e - 1]));
    }
  }
  EventSeries s;
  if (fine.size() < 2) return s;
  s.locations.resize(fine.size() - 1);
  s.freqs.resize(fine.size() - 1);
  for (std::size_t i = 0; i + 1 < fine.size(); ++i) {
    s.freqs[i] = fs / (fine[i + 1] - fine[i]);
    s.locations[i] = (fine[i] + fine[i + 1]) / 2.0 / fs;
  }
  return s;
}

// Nuttall window used directly as a low-pass impulse response; its length
// sets the cutoff (two periods of the band's boundary frequency).
std::vector<double> nuttall(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i) {
    const double t = (i + 1 - (length + 1) / 2.0) / (length + 1);
    w[i] = 0.355768 + 0.487396 * std::cos(2.0 * kPi * t) +
           0.144232 * std::cos(4.0 * kPi * t) +
           0.012604 * std::cos(6.0 * kPi * t);
  }
  return w;
}

// Linear interpolation of (xs, ys) at x, clamped to the end values.
double interp_clamped(const std::vector<double>& xs,
                      const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double span = xs[hi] - xs[lo];
  if (span <= 0.0) return ys[lo];
  const double a = (x - xs[lo]) / span;
  return ys[lo] * (1.0 - a) + ys[hi] * a;
}

struct BandEstimate {
  std::vector<double> candidate;  // per frame, 0 when invalid
  std::vector<double> deviation;  // per frame, kHuge when invalid
};

BandEstimate analyze_band(const std::vector<double>& x, double fs,
                          double boundary_f0,
                          const std::vector<double>& frame_times,
                          const PitchConfig& cfg) {
  const int T = static_cast<int>(frame_times.size());
  BandEstimate est;
  est.candidate.assign(T, 0.0);
  est.deviation.assign(T, kHuge);

  const int half_len = std::max(
      2, static_cast<int>(std::lround(fs / boundary_f0 / 2.0)));
  const auto filt = nuttall(half_len * 4);
  auto y = fft_convolve(x, filt);
  // compensate the filter delay (window center)
  const std::size_t bias = static_cast<std::size_t>(half_len) * 2;
  std::vector<double> filtered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) filtered[i] = y[i + bias];

  // four interval detectors: falling/rising zero crossings, peaks, dips
  EventSeries series[4];
  series[0] = crossings(filtered, fs);
  std::vector<double> tmp(filtered.size());
  for (std::size_t i = 0; i < filtered.size(); ++i) tmp[i] = -filtered[i];
  series[1] = crossings(tmp, fs);
  std::vector<double> diff(filtered.size() - 1);
  for (std::size_t i = 0; i + 1 < filtered.size(); ++i) {
    diff[i] = filtered[i + 1] - filtered[i];
  }
  series[2] = crossings(diff, fs);
  for (auto& d : diff) d = -d;
  series[3] = crossings(diff, fs);

  for (const auto& s : series) {
    if (s.freqs.empty()) return est;  // band has no usable periodicity
  }

  for (int t = 0; t < T; ++t) {
    double f[4];
    double mean = 0.0;
    for (int k = 0; k < 4; ++k) {
      f[k] = interp_clamped(series[k].locations, series[k].freqs,
                            frame_times[t]);
      mean += f[k];
    }
    mean /= 4.0;
    double var = 0.0;
    for (int k = 0; k < 4; ++k) var += (f[k] - mean) * (f[k] - mean);
    const double dev = std::sqrt(var / 3.0);
    if (mean > boundary_f0 || mean < boundary_f0 / 2.0 ||
        mean > cfg.f0_ceil || mean < cfg.f0_floor) {
      continue;
    }
    est.candidate[t] = mean;
    est.deviation[t] = dev;
  }
  return est;
}

}  // namespace

void validate(const PitchConfig& cfg, int sample_rate) {
  if (!(cfg.f0_floor > 0.0 && cfg.f0_floor < cfg.f0_ceil &&
        cfg.f0_ceil < sample_rate / 2.0)) {
    throw ConfigError("pitch range must satisfy 0 < floor < ceil < Nyquist");
  }
  if (cfg.channels_per_octave < 1) {
    throw ConfigError("channels_per_octave must be >= 1");
  }
}

FrameTrack estimate_f0(const AudioBuffer& audio, const FrameConfig& frames,
                       const PitchConfig& cfg) {
  validate(audio);
  validate(frames);
  validate(cfg, audio.sample_rate);

  const double fs = audio.sample_rate;
  const int T = frame_count(audio.samples.size(), frames);

  std::vector<double> frame_times(T);
  for (int t = 0; t < T; ++t) {
    frame_times[t] =
        (static_cast<double>(t) * frames.hop_length + frames.frame_length / 2.0) / fs;
  }

  // DC removal; every detector below works on sign changes.
  std::vector<double> x = audio.samples;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double& v : x) v -= mean;

  const int n_bands = std::max(
      1, static_cast<int>(std::ceil(std::log2(cfg.f0_ceil / cfg.f0_floor) *
                                    cfg.channels_per_octave)));
  std::vector<double> best_f0(T, 0.0), best_dev(T, kHuge);
  for (int b = 0; b < n_bands; ++b) {
    const double boundary =
        cfg.f0_floor *
        std::pow(2.0, static_cast<double>(b + 1) / cfg.channels_per_octave);
    const auto est = analyze_band(x, fs, boundary, frame_times, cfg);
    for (int t = 0; t < T; ++t) {
      if (est.deviation[t] < best_dev[t]) {
        best_dev[t] = est.deviation[t];
        best_f0[t] = est.candidate[t];
      }
    }
  }

  const double silence_rms =
      std::pow(10.0, cfg.silence_floor_db / 20.0);

  FrameTrack track;
  track.f0.assign(T, 0.0);
  track.voiced.assign(T, 0);
  for (int t = 0; t < T; ++t) {
    if (best_f0[t] <= 0.0) continue;
    // periodicity-stability score: 1 when the four detectors agree exactly,
    // decaying with their relative spread
    const double rel_dev = best_dev[t] / best_f0[t];
    const double score = std::exp(-rel_dev / 0.05);
    if (score < cfg.voicing_threshold) continue;

    double acc = 0.0;
    const std::size_t off =
        static_cast<std::size_t>(t) * frames.hop_length;
    for (int i = 0; i < frames.frame_length; ++i) {
      acc += audio.samples[off + i] * audio.samples[off + i];
    }
    if (std::sqrt(acc / frames.frame_length) < silence_rms) continue;

    track.f0[t] = best_f0[t];
    track.voiced[t] = 1;
  }
  return track;
}

}  // namespace prosody
