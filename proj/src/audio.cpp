#include "prosody/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "prosody/error.hpp"

namespace prosody {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

void validate(const AudioBuffer& audio) {
  if (audio.samples.empty()) throw DataError("audio buffer is empty");
  if (audio.sample_rate <= 0) throw DataError("audio sample rate must be > 0");
  for (double s : audio.samples) {
    if (!std::isfinite(s)) throw DataError("audio contains non-finite sample");
  }
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      sample_rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (data == nullptr || sample_rate == 0) {
    throw DataError("WAV file missing fmt/data chunk: " + path);
  }
  if (channels != 1) {
    throw DataError("multi-channel WAV not supported: " + path);
  }
  if (data + data_size > bytes.data() + bytes.size()) {
    throw DataError("WAV data chunk truncated: " + path);
  }

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(sample_rate);
  if (format == 1 && bits == 16) {
    const std::size_t n = data_size / 2;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int16_t v = static_cast<std::int16_t>(
          data[2 * i] | (static_cast<std::uint16_t>(data[2 * i + 1]) << 8));
      audio.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t n = data_size / 4;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t raw = read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &raw, 4);
      audio.samples[i] = static_cast<double>(f);
    }
  } else {
    throw DataError("unsupported WAV encoding (need 16-bit PCM or 32-bit "
                    "float): " + path);
  }
  validate(audio);
  return audio;
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  validate(audio);
  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_size = n * 2;
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_size);
  for (std::uint32_t i = 0; i < n; ++i) {
    double v = audio.samples[i];
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    const int q = static_cast<int>(std::lrint(v * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace prosody
