// Little-endian framing helpers shared by the checkpoint and dataset formats.
#ifndef BLOTCHECK_SRC_BINARY_IO_HPP
#define BLOTCHECK_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "blotcheck/error.hpp"

namespace blotcheck::io {

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void text(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

  void f32s(const float* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      f32(v[i]);
    }
  }

  /// Appends CRC32 of everything written so far.
  void crc() { uint(static_cast<std::uint32_t>(::crc32(0L, out_.data(), static_cast<uInt>(out_.size())))); }

  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) {
      throw Error(ErrorCode::FormatError, "unexpected end of data");
    }
  }

  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }

  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

  void f32s(float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = f32();
    }
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

/// Verifies a trailing CRC32 and returns the payload it covers. Throws ChecksumMismatch.
inline std::span<const std::uint8_t> checked_payload(std::span<const std::uint8_t> file, std::size_t min_payload) {
  if (file.size() < min_payload + 4) {
    throw Error(ErrorCode::ChecksumMismatch, "file too short to carry a checksum");
  }
  const auto payload = file.first(file.size() - 4);
  ByteReader tail(file.last(4));
  const auto stored = tail.uint<std::uint32_t>();
  const auto actual = static_cast<std::uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
  if (stored != actual) {
    throw Error(ErrorCode::ChecksumMismatch, "CRC32 does not match contents");
  }
  return payload;
}

}  // namespace blotcheck::io

#endif  // BLOTCHECK_SRC_BINARY_IO_HPP
