#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "boaw/error.hpp"

namespace boaw {

/// Mono PCM signal. Amplitudes keep the raw 16-bit integer scale; stereo
/// downmixing can produce half-integer values.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_le16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

/// Decodes a RIFF/WAVE byte image holding 16-bit PCM, mono or stereo.
inline AudioBuffer decode_wav(std::span<const unsigned char> bytes, const std::string& origin = "<memory>") {
  using detail::read_le16;
  using detail::read_le32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(origin + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw FormatError(origin + ": truncated fmt chunk");
      format_tag = read_le16(bytes.data() + body);
      channels = read_le16(bytes.data() + body + 2);
      rate = read_le32(bytes.data() + body + 4);
      bits = read_le16(bytes.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format in the sub-format GUID.
      if (format_tag == 0xFFFE && size >= 40 && body + 26 <= bytes.size()) {
        format_tag = read_le16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(origin + ": data chunk precedes fmt chunk");
      if (format_tag != 1 || bits != 16 || (channels != 1 && channels != 2)) {
        throw UnsupportedFormatError(origin + ": unsupported encoding (format_tag=" +
                                     std::to_string(format_tag) + ", bits_per_sample=" +
                                     std::to_string(bits) + ", channels=" +
                                     std::to_string(channels) + "); need 16-bit PCM mono/stereo");
      }
      if (rate == 0) throw FormatError(origin + ": sample rate is zero");
      const std::size_t available = bytes.size() - body;
      if (available < size) {
        throw FormatError(origin + ": data chunk truncated, expected " + std::to_string(size) +
                          " bytes, found " + std::to_string(available));
      }
      const std::size_t frame_bytes = 2u * channels;
      if (size % frame_bytes != 0) {
        throw FormatError(origin + ": data chunk size " + std::to_string(size) +
                          " is not a multiple of the frame size " + std::to_string(frame_bytes));
      }
      AudioBuffer out;
      out.sample_rate = static_cast<int>(rate);
      const std::size_t frames = size / frame_bytes;
      out.samples.resize(frames);
      const unsigned char* p = bytes.data() + body;
      for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(read_le16(p + f * frame_bytes + 2 * c));
        }
        out.samples[f] = acc / channels;
      }
      if (out.samples.empty()) throw FormatError(origin + ": data chunk holds no samples");
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(origin + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

/// Encodes interleaved 16-bit samples as a canonical 44-byte-header WAV.
inline std::string encode_wav(std::span<const std::int16_t> interleaved, int channels, int sample_rate) {
  using detail::put_le16;
  using detail::put_le32;
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_le32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_le32(out, 16);
  put_le16(out, 1);
  put_le16(out, static_cast<std::uint16_t>(channels));
  put_le32(out, static_cast<std::uint32_t>(sample_rate));
  put_le32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  put_le16(out, static_cast<std::uint16_t>(channels * 2));
  put_le16(out, 16);
  out += "data";
  put_le32(out, data_bytes);
  for (std::int16_t s : interleaved) put_le16(out, static_cast<std::uint16_t>(s));
  return out;
}

inline void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> interleaved,
                      int channels, int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  const std::string bytes = encode_wav(interleaved, channels, sample_rate);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace boaw
