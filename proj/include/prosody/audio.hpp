#ifndef PROSODY_AUDIO_HPP_
#define PROSODY_AUDIO_HPP_

#include <string>
#include <vector>

namespace prosody {

// Mono audio in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;
};

// Throws DataError if the buffer is empty, has non-finite samples, or a
// non-positive rate.
void validate(const AudioBuffer& audio);

// Reads a mono WAV file. Supported encodings: 16-bit signed PCM and 32-bit
// IEEE float. Multi-channel files are rejected.
AudioBuffer read_wav(const std::string& path);

// Writes 16-bit PCM. Samples are clipped to [-1, 1].
void write_wav(const std::string& path, const AudioBuffer& audio);

}  // namespace prosody

#endif  // PROSODY_AUDIO_HPP_
