#include "udm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "udm/error.hpp"

namespace udm {
namespace {

constexpr std::uint16_t kFormatPcm = 1;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

void validate_audio(const AudioBuffer& audio) {
  if (audio.sample_rate < 8000) {
    throw Error(ErrorCode::InvalidConfig,
                "sample rate " + std::to_string(audio.sample_rate) + " Hz is below 8000 Hz");
  }
  for (double s : audio.samples) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidConfig, "non-finite sample");
  }
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw Error(ErrorCode::CorruptFile, "file shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw Error(ErrorCode::CorruptFile, "chunk '" + std::string(chunk, chunk + 4) + "' is truncated");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::CorruptFile, "fmt chunk too small");
      const std::uint8_t* f = bytes.data() + body;
      const std::uint16_t format = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint16_t bits = read_u16(f + 14);
      if (format != kFormatPcm) {
        throw Error(ErrorCode::UnsupportedFormat, "format tag " + std::to_string(format) + " is not PCM");
      }
      if (channels != 1) {
        throw Error(ErrorCode::UnsupportedFormat, std::to_string(channels) + " channels, expected mono");
      }
      if (bits != 16) {
        throw Error(ErrorCode::UnsupportedFormat, std::to_string(bits) + "-bit samples, expected 16");
      }
      sample_rate = static_cast<int>(read_u32(f + 4));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::CorruptFile, "data chunk precedes fmt chunk");
      if (size % 2 != 0) throw Error(ErrorCode::CorruptFile, "odd data chunk size for 16-bit PCM");
      AudioBuffer audio;
      audio.sample_rate = sample_rate;
      audio.samples.resize(size / 2);
      const std::uint8_t* d = bytes.data() + body;
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(d + 2 * i));
        audio.samples[i] = static_cast<double>(v) / 32768.0;
      }
      validate_audio(audio);
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::CorruptFile, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

AudioBuffer load_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double scaled = std::round(s * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void save_audio(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const auto bytes = encode_wav(audio);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace udm
