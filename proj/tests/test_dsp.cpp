#include <algorithm>
#include <fstream>
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "prosody/audio.hpp"
#include "prosody/error.hpp"
#include "prosody/fft.hpp"
#include "prosody/mel.hpp"
#include "prosody/pitch.hpp"
#include "prosody/rng.hpp"
#include "prosody/stft.hpp"
#include "support/signals.hpp"

using namespace prosody;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

// Naive DFT oracle for the FFT.
std::vector<std::complex<double>> dft(const std::vector<double>& x, int n) {
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int i = 0; i < static_cast<int>(x.size()); ++i) {
      const double ang = -2.0 * 3.141592653589793 * k * i / n;
      acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("rfft matches naive DFT, power-of-two and Bluestein sizes") {
  Rng rng(7);
  for (int n : {16, 64, 12, 50, 81}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const auto fast = rfft(x, n);
    const auto slow = dft(x, n);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t k = 0; k < fast.size(); ++k) {
      CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
    }
  }
}

TEST_CASE("stft of zero audio is all-zero") {
  const auto audio = testsig::silence(1.0, 22050);
  const auto spec = stft(audio, FrameConfig{});
  for (double m : spec.mag) CHECK(m == 0.0);
}

TEST_CASE("stft frame count formula") {
  const auto audio = testsig::sine(220.0, 1.0, 22050);
  REQUIRE(audio.samples.size() == 22050);
  const auto spec = stft(audio, FrameConfig{1024, 256, 1024});
  CHECK(spec.n_frames == 1 + (22050 - 1024) / 256);
  CHECK(spec.n_frames == 83);
  CHECK(spec.n_bins == 513);
}

TEST_CASE("stft frame count formula on random framings") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const int frame = 64 + static_cast<int>(rng.below(1024));
    const int hop = 1 + static_cast<int>(rng.below(frame));
    int fft_size = frame;
    const std::size_t n = frame + rng.below(20000);
    FrameConfig cfg{frame, hop, fft_size};
    AudioBuffer audio;
    audio.sample_rate = 22050;
    audio.samples.assign(n, 0.0);
    audio.samples[0] = 0.5;
    const auto spec = stft(audio, cfg);
    CHECK(spec.n_frames ==
          1 + static_cast<int>((n - static_cast<std::size_t>(frame)) / hop));
  }
}

TEST_CASE("stft rejects audio shorter than one frame") {
  AudioBuffer audio;
  audio.sample_rate = 22050;
  audio.samples.assign(100, 0.1);
  CHECK_THROWS_AS(stft(audio, FrameConfig{1024, 256, 1024}), DataError);
}

TEST_CASE("sine at a bin-center frequency peaks at that bin in every frame") {
  const int sr = 22050;
  const int k = 40;
  const double freq = static_cast<double>(k) * sr / 1024;
  const auto audio = testsig::sine(freq, 0.5, sr);
  const auto spec = stft(audio, FrameConfig{1024, 256, 1024});
  for (int t = 0; t < spec.n_frames; ++t) {
    int arg = 0;
    for (int b = 1; b < spec.n_bins; ++b) {
      if (spec.at(t, b) > spec.at(t, arg)) arg = b;
    }
    CHECK(arg == k);
  }
}

TEST_CASE("frame_energy on hand-built magnitudes") {
  Spectrogram spec;
  spec.n_frames = 2;
  spec.n_bins = 2;
  spec.mag = {3.0, 4.0, 0.0, 0.0};
  const auto e = frame_energy(spec);
  CHECK(e[0] == doctest::Approx(5.0));
  CHECK(e[1] == 0.0);
}

TEST_CASE("frame_energy matches elementwise oracle on random matrix") {
  Rng rng(3);
  Spectrogram spec;
  spec.n_frames = 5;
  spec.n_bins = 9;
  spec.mag.resize(45);
  for (auto& m : spec.mag) m = rng.uniform(0.0, 2.0);
  const auto e = frame_energy(spec);
  for (int t = 0; t < 5; ++t) {
    double sum = 0.0;
    for (int k = 0; k < 9; ++k) sum += spec.at(t, k) * spec.at(t, k);
    CHECK(e[t] == doctest::Approx(std::sqrt(sum)).epsilon(1e-12));
  }
}

TEST_CASE("energy scales linearly with input amplitude") {
  const auto base = testsig::sawtooth(150.0, 0.4, 22050, 0.2);
  AudioBuffer scaled = base;
  for (auto& s : scaled.samples) s *= 3.0;
  const auto e1 = frame_energy(stft(base, FrameConfig{}));
  const auto e2 = frame_energy(stft(scaled, FrameConfig{}));
  for (std::size_t t = 0; t < e1.size(); ++t) {
    CHECK(e2[t] == doctest::Approx(3.0 * e1[t]).epsilon(1e-6));
  }
}

TEST_CASE("mel of zero spectrogram is zero without log") {
  const auto audio = testsig::silence(0.5, 22050);
  const auto spec = stft(audio, FrameConfig{});
  MelConfig mc;
  mc.log_compress = false;
  const auto mel = mel_spectrogram(spec, mc);
  for (double v : mel.frames) CHECK(v == 0.0);
}

TEST_CASE("single-bin impulse lights only covering mel channels") {
  Spectrogram spec;
  spec.n_frames = 1;
  spec.n_bins = 513;
  spec.config = FrameConfig{};
  spec.sample_rate = 22050;
  spec.mag.assign(513, 0.0);
  const int hot = 100;
  spec.mag[hot] = 1.0;
  MelConfig mc;
  mc.n_mels = 20;
  mc.log_compress = false;
  const auto bank = mel_filterbank(mc, 1024, 22050);
  const auto mel = mel_spectrogram(spec, mc);
  for (int m = 0; m < mc.n_mels; ++m) {
    const double w = bank[static_cast<std::size_t>(m) * 513 + hot];
    if (w == 0.0) {
      CHECK(mel.at(0, m) == 0.0);
    } else {
      CHECK(mel.at(0, m) == doctest::Approx(w));
    }
  }
}

TEST_CASE("mel matches explicit matrix product on a toy spectrogram") {
  Rng rng(5);
  Spectrogram spec;
  spec.n_frames = 3;
  spec.n_bins = 33;
  spec.config = FrameConfig{64, 16, 64};
  spec.sample_rate = 8000;
  spec.mag.resize(99);
  for (auto& m : spec.mag) m = rng.uniform(0.0, 1.0);
  MelConfig mc;
  mc.n_mels = 2;
  mc.fmax = 4000.0;
  mc.log_compress = false;
  const auto bank = mel_filterbank(mc, 64, 8000);
  const auto mel = mel_spectrogram(spec, mc);
  for (int t = 0; t < 3; ++t) {
    for (int m = 0; m < 2; ++m) {
      double acc = 0.0;
      for (int k = 0; k < 33; ++k) {
        acc += bank[static_cast<std::size_t>(m) * 33 + k] * spec.at(t, k);
      }
      CHECK(mel.at(t, m) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("mel rejects fmax above Nyquist") {
  const auto audio = testsig::sine(220.0, 0.2, 8000);
  const auto spec = stft(audio, FrameConfig{256, 64, 256});
  MelConfig mc;
  mc.fmax = 6000.0;
  CHECK_THROWS_AS(mel_spectrogram(spec, mc), ConfigError);
}

TEST_CASE("f0 of a pure 220 Hz sine") {
  const auto audio = testsig::sine(220.0, 1.0, 22050);
  const auto track = estimate_f0(audio, FrameConfig{}, PitchConfig{});
  REQUIRE(track.size() == 83);
  std::vector<double> voiced_f0;
  int n_voiced = 0;
  for (int t = 0; t < track.size(); ++t) {
    if (track.voiced[t]) {
      ++n_voiced;
      voiced_f0.push_back(track.f0[t]);
    }
  }
  CHECK(n_voiced == track.size());  // 100% voiced
  CHECK(std::abs(median(voiced_f0) - 220.0) < 0.01 * 220.0);
}

TEST_CASE("digital silence is fully unvoiced") {
  const auto audio = testsig::silence(1.0, 22050);
  const auto track = estimate_f0(audio, FrameConfig{}, PitchConfig{});
  for (int t = 0; t < track.size(); ++t) {
    CHECK(track.voiced[t] == 0);
    CHECK(track.f0[t] == 0.0);
  }
}

TEST_CASE("sawtooth sweep tracks the analytic frequency schedule") {
  const int sr = 22050;
  const double secs = 1.0;
  const auto audio = testsig::sawtooth_sweep(100.0, 300.0, secs, sr);
  const FrameConfig fc{};
  const auto track = estimate_f0(audio, fc, PitchConfig{});
  int voiced = 0, within = 0;
  for (int t = 0; t < track.size(); ++t) {
    if (!track.voiced[t]) continue;
    ++voiced;
    const double tc = (t * fc.hop_length + fc.frame_length / 2.0) / sr;
    const double expected = 100.0 + 200.0 * tc / secs;
    if (std::abs(track.f0[t] - expected) <= 0.05 * expected) ++within;
  }
  REQUIRE(voiced > 0);
  CHECK(static_cast<double>(within) / voiced >= 0.9);
}

TEST_CASE("f0 estimation is amplitude invariant on non-clipping signals") {
  const auto base = testsig::sawtooth(180.0, 0.6, 22050, 0.6);
  const auto ref = estimate_f0(base, FrameConfig{}, PitchConfig{});
  for (double c : {0.1, 0.37, 1.0}) {
    AudioBuffer scaled = base;
    for (auto& s : scaled.samples) s *= c;
    const auto track = estimate_f0(scaled, FrameConfig{}, PitchConfig{});
    REQUIRE(track.size() == ref.size());
    for (int t = 0; t < ref.size(); ++t) {
      CHECK(track.voiced[t] == ref.voiced[t]);
      if (ref.voiced[t]) {
        CHECK(std::abs(track.f0[t] - ref.f0[t]) <= 1e-3 * ref.f0[t]);
      }
    }
  }
}

TEST_CASE("f0 is zero exactly where unvoiced") {
  // half silence, half tone
  auto tone = testsig::sine(220.0, 0.5, 22050);
  auto audio = testsig::silence(0.5, 22050);
  audio.samples.insert(audio.samples.end(), tone.samples.begin(),
                       tone.samples.end());
  const auto track = estimate_f0(audio, FrameConfig{}, PitchConfig{});
  for (int t = 0; t < track.size(); ++t) {
    CHECK((track.f0[t] > 0.0) == (track.voiced[t] != 0));
  }
}

TEST_CASE("frame counts agree across stft, energy, mel, and f0") {
  const auto audio = testsig::sawtooth(140.0, 0.73, 22050, 0.4);
  const FrameConfig fc{};
  const auto spec = stft(audio, fc);
  const auto energy = frame_energy(spec);
  MelConfig mc;
  const auto mel = mel_spectrogram(spec, mc);
  const auto track = estimate_f0(audio, fc, PitchConfig{});
  CHECK(static_cast<int>(energy.size()) == spec.n_frames);
  CHECK(mel.n_frames == spec.n_frames);
  CHECK(track.size() == spec.n_frames);
}

TEST_CASE("wav round trip and channel rejection") {
  const auto audio = testsig::sine(330.0, 0.25, 22050, 0.4);
  const std::string path = "test_dsp_roundtrip.wav";
  write_wav(path, audio);
  const auto back = read_wav(path);
  REQUIRE(back.samples.size() == audio.samples.size());
  CHECK(back.sample_rate == 22050);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    CHECK(std::abs(back.samples[i] - audio.samples[i]) <= 1.0 / 32768.0);
  }
}

TEST_CASE("multi-channel wav files are rejected") {
  // hand-built 2-channel, 16-bit PCM RIFF file
  std::string wav;
  auto put16 = [&](int v) {
    wav.push_back(static_cast<char>(v & 0xff));
    wav.push_back(static_cast<char>((v >> 8) & 0xff));
  };
  auto put32 = [&](unsigned v) {
    for (int i = 0; i < 4; ++i) wav.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  const int n = 64;
  wav += "RIFF";
  put32(36 + n * 4);
  wav += "WAVEfmt ";
  put32(16);
  put16(1);       // PCM
  put16(2);       // stereo
  put32(22050);
  put32(22050 * 4);
  put16(4);
  put16(16);
  wav += "data";
  put32(n * 4);
  for (int i = 0; i < n * 2; ++i) put16(100 * i);
  {
    std::ofstream f("test_dsp_stereo.wav", std::ios::binary);
    f.write(wav.data(), static_cast<std::streamsize>(wav.size()));
  }
  CHECK_THROWS_AS(read_wav("test_dsp_stereo.wav"), DataError);
}
