#pragma once

// WAV decoding/encoding, linear resampling and one-second segmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "affd/detail/binary_io.hpp"
#include "affd/error.hpp"

namespace affd {

/// Mono waveform with amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

namespace wav {

inline constexpr std::uint16_t kFormatPcm = 0x0001;
inline constexpr std::uint16_t kFormatFloat = 0x0003;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline bool fourcc_is(std::span<const std::uint8_t> b, const char* tag) {
  return b.size() == 4 && b[0] == tag[0] && b[1] == tag[1] && b[2] == tag[2] && b[3] == tag[3];
}

/// Decodes an in-memory RIFF/WAVE image. Stereo is downmixed by channel mean.
inline AudioClip decode(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (!r.can_read(12)) throw DecodeError("RIFF header: file shorter than 12 bytes");
  if (!fourcc_is(r.bytes(4, "RIFF id"), "RIFF")) throw DecodeError("RIFF header: missing 'RIFF' id");
  r.read<std::uint32_t>("RIFF size");
  if (!fourcc_is(r.bytes(4, "WAVE id"), "WAVE")) throw DecodeError("RIFF header: form type is not 'WAVE'");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;

  while (r.remaining() >= 8) {
    auto id = r.bytes(4, "chunk id");
    const std::uint32_t size = r.read<std::uint32_t>("chunk size");
    const std::string name(id.begin(), id.end());
    if (!r.can_read(size)) throw DecodeError("'" + name + "' chunk: declared size exceeds file");

    if (name == "fmt ") {
      if (size < 16) throw DecodeError("'fmt ' chunk: shorter than 16 bytes");
      auto body = r.bytes(size, "fmt body");
      format = detail::get_le<std::uint16_t>(body.data());
      channels = detail::get_le<std::uint16_t>(body.data() + 2);
      rate = detail::get_le<std::uint32_t>(body.data() + 4);
      bits = detail::get_le<std::uint16_t>(body.data() + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw DecodeError("'fmt ' chunk: extensible format shorter than 40 bytes");
        format = detail::get_le<std::uint16_t>(body.data() + 24);
      }
      have_fmt = true;
    } else if (name == "data") {
      if (!have_fmt) throw DecodeError("'data' chunk: appears before 'fmt ' chunk");
      if (channels != 1 && channels != 2)
        throw UnsupportedFormatError("unsupported channel count " + std::to_string(channels));
      if (rate == 0) throw DecodeError("'fmt ' chunk: sample rate is zero");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32)
        throw UnsupportedFormatError("unsupported codec: format tag " + std::to_string(format) + ", " +
                                     std::to_string(bits) + " bits");
      const std::size_t bytes_per_frame = channels * (bits / 8u);
      auto body = r.bytes(size, "data body");
      const std::size_t frames = body.size() / bytes_per_frame;

      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::uint8_t* p = body.data() + f * bytes_per_frame + c * (bits / 8u);
          double v;
          if (pcm16) {
            v = detail::get_le<std::int16_t>(p) / 32768.0;
          } else {
            v = detail::get_le<float>(p);
            if (!std::isfinite(v)) throw DecodeError("'data' chunk: non-finite float sample");
            v = std::clamp(v, -1.0, 1.0);
          }
          acc += v;
        }
        clip.samples[f] = acc / channels;
      }
      return clip;
    } else {
      r.skip(size, "chunk body");
    }
    if ((size & 1u) && r.remaining() > 0) r.skip(1, "chunk pad byte");
  }
  if (!have_fmt) throw DecodeError("'fmt ' chunk: missing");
  throw DecodeError("'data' chunk: missing");
}

/// PCM-16 quantization used by the encoder: round(x * 32768) clamped to int16.
inline std::int16_t quantize_pcm16(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

/// Encodes a mono PCM-16 RIFF/WAVE image.
inline std::vector<std::uint8_t> encode_pcm16(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  detail::put_le<std::uint32_t>(out, 36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  detail::put_le<std::uint32_t>(out, 16);
  detail::put_le<std::uint16_t>(out, kFormatPcm);
  detail::put_le<std::uint16_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  detail::put_le<std::uint16_t>(out, 2);
  detail::put_le<std::uint16_t>(out, 16);
  tag("data");
  detail::put_le<std::uint32_t>(out, data_bytes);
  for (double s : clip.samples) detail::put_le<std::int16_t>(out, quantize_pcm16(s));
  return out;
}

}  // namespace wav

inline AudioClip load_wav(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return wav::decode(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path + ": " + e.what());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path + ": " + e.what());
  }
}

inline void write_wav_pcm16(const std::string& path, const AudioClip& clip) {
  detail::write_file(path, wav::encode_pcm16(clip));
}

/// Linear-interpolation resampler. Output length is round(n * target / source).
inline AudioClip resample(const AudioClip& clip, int target_sr) {
  if (target_sr <= 0) throw ConfigError("resample: target rate must be positive");
  if (clip.sample_rate <= 0) throw ConfigError("resample: source rate must be positive");
  if (target_sr == clip.sample_rate) return clip;

  const std::size_t n = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * target_sr / clip.sample_rate));
  AudioClip out;
  out.sample_rate = target_sr;
  out.samples.resize(out_len);
  if (n == 0) return out;
  const double step = static_cast<double>(clip.sample_rate) / target_sr;
  for (std::size_t j = 0; j < out_len; ++j) {
    const double pos = j * step;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= n) {
      out.samples[j] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i);
    out.samples[j] = clip.samples[i] + frac * (clip.samples[i + 1] - clip.samples[i]);
  }
  return out;
}

/// Non-overlapping one-second windows; the trailing partial second is dropped.
inline std::vector<AudioClip> segment_one_second(const AudioClip& clip) {
  std::vector<AudioClip> out;
  if (clip.sample_rate <= 0) return out;
  const auto sr = static_cast<std::size_t>(clip.sample_rate);
  const std::size_t count = clip.samples.size() / sr;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(k * sr),
                       clip.samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * sr));
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace affd
