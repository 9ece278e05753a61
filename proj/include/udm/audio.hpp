#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace udm {

/// Mono audio with amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Throws InvalidConfig when the rate is below 8 kHz or a sample is not finite.
void validate_audio(const AudioBuffer& audio);

/// RIFF/WAVE, PCM 16-bit, mono. Samples are scaled by 1/32768.
AudioBuffer load_audio(const std::filesystem::path& path);
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);
void save_audio(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace udm
