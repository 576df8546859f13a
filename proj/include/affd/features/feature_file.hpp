#pragma once

// "AFFD" feature files:
//   magic "AFFD" | version u8 | kind u8 | reserved u16 | rows u32 | cols u32 | rows*cols f32
// all little-endian, payload row-major.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "affd/detail/binary_io.hpp"
#include "affd/dsp/cepstral.hpp"
#include "affd/error.hpp"

namespace affd::features {

inline constexpr std::uint8_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;
// Upper bound on payload elements accepted by the reader (256 Mi floats).
inline constexpr std::uint64_t kMaxFeatureElements = 1ull << 28;

class FeatureFileError : public DecodeError {
 public:
  enum class Kind { bad_magic, bad_version, bad_kind, truncated, dimension_overflow };
  FeatureFileError(Kind kind, const std::string& msg) : DecodeError(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline std::vector<std::uint8_t> encode_feature(const FeatureMatrix& m) {
  if (m.rows > std::numeric_limits<std::uint32_t>::max() || m.cols > std::numeric_limits<std::uint32_t>::max())
    throw FeatureFileError(FeatureFileError::Kind::dimension_overflow, "feature dimensions exceed u32");
  std::vector<std::uint8_t> out{'A', 'F', 'F', 'D', kFeatureFormatVersion};
  out.reserve(kFeatureHeaderBytes + m.values.size() * 4);
  out.push_back(static_cast<std::uint8_t>(m.kind));
  detail::put_le<std::uint16_t>(out, 0);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.values) detail::put_le<float>(out, static_cast<float>(v));
  return out;
}

inline FeatureMatrix decode_feature(std::span<const std::uint8_t> bytes) {
  using K = FeatureFileError::Kind;
  if (bytes.size() < kFeatureHeaderBytes) throw FeatureFileError(K::truncated, "feature file: header truncated");
  if (!(bytes[0] == 'A' && bytes[1] == 'F' && bytes[2] == 'F' && bytes[3] == 'D'))
    throw FeatureFileError(K::bad_magic, "feature file: magic mismatch (expected 'AFFD')");
  if (bytes[4] != kFeatureFormatVersion)
    throw FeatureFileError(K::bad_version, "feature file: unsupported version " + std::to_string(bytes[4]));
  if (bytes[5] > 1) throw FeatureFileError(K::bad_kind, "feature file: unknown kind " + std::to_string(bytes[5]));
  const auto kind = static_cast<FeatureKind>(bytes[5]);
  const auto rows = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto cols = detail::get_le<std::uint32_t>(bytes.data() + 12);
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (count > kMaxFeatureElements)
    throw FeatureFileError(K::dimension_overflow, "feature file: " + std::to_string(rows) + "x" + std::to_string(cols) +
                                                      " exceeds the element limit");
  if (bytes.size() - kFeatureHeaderBytes < count * 4)
    throw FeatureFileError(K::truncated, "feature file: payload truncated");

  const auto [a0, a1] = default_axes(kind);
  FeatureMatrix m(rows, cols, kind, a0, a1);
  const std::uint8_t* p = bytes.data() + kFeatureHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) m.values[i] = detail::get_le<float>(p + 4 * i);
  return m;
}

inline void write_feature(const std::string& path, const FeatureMatrix& m) {
  detail::write_file(path, encode_feature(m));
}

inline FeatureMatrix read_feature(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_feature(bytes);
  } catch (const FeatureFileError& e) {
    throw FeatureFileError(e.kind(), path + ": " + e.what());
  }
}

}  // namespace affd::features
