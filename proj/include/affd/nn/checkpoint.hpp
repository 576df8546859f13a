#pragma once

// "AFFC" checkpoints:
//   magic "AFFC" | version u32 | config digest u64 | config length u32 | config text (UTF-8)
//   | entry count u32 | per entry: name length u32, name, 4 x u32 shape, f32 payload
// little-endian. The digest is FNV-1a 64 of the config text, which the loader re-verifies.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "affd/detail/binary_io.hpp"
#include "affd/error.hpp"
#include "affd/nn/tensor.hpp"

namespace affd::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class DigestMismatchError : public Error {
 public:
  DigestMismatchError(std::uint64_t expected, std::uint64_t found)
      : Error("config digest mismatch: expected " + hex(expected) + ", checkpoint has " + hex(found)),
        expected_(expected),
        found_(found) {}
  std::uint64_t expected() const { return expected_; }
  std::uint64_t found() const { return found_; }

  static std::string hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
  }

 private:
  std::uint64_t expected_, found_;
};

struct CheckpointHeader {
  std::uint64_t digest = 0;
  std::string config;
};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const StateRefs<T>& refs, const std::string& config) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'A', 'F', 'F', 'C'});
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint64_t>(out, detail::fnv1a64(config));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out.insert(out.end(), config.begin(), config.end());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(refs.params.size() + refs.buffers.size()));
  auto entry = [&](const std::string& name, const Tensor<T>& t) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    for (auto d : t.shape) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (T v : t.data) detail::put_le<float>(out, static_cast<float>(v));
  };
  for (const auto& [name, p] : refs.params) entry(name, p->value);
  for (const auto& [name, b] : refs.buffers) entry(name, *b);
  return out;
}

inline CheckpointHeader read_checkpoint_header(detail::ByteReader& r) {
  auto magic = r.bytes(4, "checkpoint magic");
  if (!(magic[0] == 'A' && magic[1] == 'F' && magic[2] == 'F' && magic[3] == 'C'))
    throw DecodeError("checkpoint: magic mismatch (expected 'AFFC')");
  const auto version = r.read<std::uint32_t>("checkpoint version");
  if (version != kCheckpointVersion) throw DecodeError("checkpoint: unsupported version " + std::to_string(version));
  CheckpointHeader h;
  h.digest = r.read<std::uint64_t>("checkpoint digest");
  const auto len = r.read<std::uint32_t>("config length");
  auto text = r.bytes(len, "config text");
  h.config.assign(text.begin(), text.end());
  if (detail::fnv1a64(h.config) != h.digest) throw DigestMismatchError(detail::fnv1a64(h.config), h.digest);
  return h;
}

inline CheckpointHeader read_checkpoint_header(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  return read_checkpoint_header(r);
}

/// Loads every named tensor into `refs`. Names and shapes must match exactly.
template <typename T>
CheckpointHeader decode_checkpoint_into(std::span<const std::uint8_t> bytes, const StateRefs<T>& refs,
                                        std::uint64_t expected_digest) {
  detail::ByteReader r(bytes);
  CheckpointHeader h = read_checkpoint_header(r);
  if (h.digest != expected_digest) throw DigestMismatchError(expected_digest, h.digest);

  std::map<std::string, Tensor<T>*> targets;
  for (const auto& [name, p] : refs.params) targets[name] = &p->value;
  for (const auto& [name, b] : refs.buffers) targets[name] = b;

  const auto count = r.read<std::uint32_t>("entry count");
  if (count != targets.size())
    throw DecodeError("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                      std::to_string(targets.size()));
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto nlen = r.read<std::uint32_t>("entry name length");
    auto nb = r.bytes(nlen, "entry name");
    const std::string name(nb.begin(), nb.end());
    auto it = targets.find(name);
    if (it == targets.end()) throw DecodeError("checkpoint: unknown tensor '" + name + "'");
    std::array<std::size_t, 4> shape{};
    for (auto& d : shape) d = r.read<std::uint32_t>("entry shape");
    Tensor<T>& t = *it->second;
    if (shape != t.shape)
      throw DecodeError("checkpoint: tensor '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                        shape_string(t.shape));
    auto payload = r.bytes(t.numel() * 4, "entry payload");
    for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = static_cast<T>(detail::get_le<float>(payload.data() + 4 * i));
  }
  return h;
}

}  // namespace affd::nn
