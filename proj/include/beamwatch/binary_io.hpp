#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "beamwatch/error.hpp"

namespace beamwatch::io {

/// CRC-32 (zlib polynomial) of a byte range.
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::size_t size() const { return buf_.size(); }
  void reserve(std::size_t n) { buf_.reserve(n); }

  template <typename U>
  void put(U value) {
    static_assert(std::is_trivially_copyable_v<U>);
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    buf_.insert(buf_.end(), raw, raw + sizeof(U));
  }

  void put_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + size);
  }

  void put_string(std::string_view s) { put_bytes(s.data(), s.size()); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; running past the end is a truncation error.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size, std::string context)
      : data_(data), size_(size), context_(std::move(context)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  void seek(std::size_t pos) {
    if (pos > size_) truncated(pos - size_);
    pos_ = pos;
  }

  template <typename U>
  U get() {
    require(sizeof(U));
    std::uint8_t raw[sizeof(U)];
    std::memcpy(raw, data_ + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    pos_ += sizeof(U);
    U value;
    std::memcpy(&value, raw, sizeof(U));
    return value;
  }

  const std::uint8_t* take(std::size_t n) {
    require(n);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  std::string get_string(std::size_t n) {
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

 private:
  void require(std::size_t n) {
    if (n > size_ - pos_) truncated(n - (size_ - pos_));
  }
  [[noreturn]] void truncated(std::size_t missing) const {
    throw FormatError(FormatError::Kind::kTruncated,
                      context_ + ": truncated, " + std::to_string(missing) + " byte(s) missing at offset " +
                          std::to_string(pos_));
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes atomically via a temporary file in the same directory.
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace beamwatch::io
