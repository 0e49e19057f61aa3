#pragma once

// Little-endian byte buffer helpers shared by every binary format in the
// library. All multi-byte fields are written LE regardless of host order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "probekit/errors.hpp"

namespace probekit::detail {

template <typename T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

class ByteWriter {
 public:
  void put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

  template <typename T>
  void put(T value) {
    value = byteswap_if_big(value);
    const auto* p = reinterpret_cast<const char*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  template <typename T>
  void put_array(const T* values, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(values);
      buf_.insert(buf_.end(), p, p + count * sizeof(T));
    } else {
      for (std::size_t i = 0; i < count; ++i) put(values[i]);
    }
  }

  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& buf, std::string context)
      : buf_(buf), context_(std::move(context)) {}

  std::string take_bytes(std::size_t n) {
    require(n);
    std::string out(buf_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return byteswap_if_big(value);
  }

  template <typename T>
  void get_array(T* out, std::size_t count) {
    expect(count, sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out, buf_.data() + pos_, count * sizeof(T));
      pos_ += count * sizeof(T);
    } else {
      for (std::size_t i = 0; i < count; ++i) out[i] = get<T>();
    }
  }

  // Throws TruncatedError unless `count` elements of `elem_size` bytes remain.
  // Call before sizing a buffer from a length field read off disk.
  void expect(std::uint64_t count, std::size_t elem_size) const {
    if (count != 0 && count > remaining() / elem_size) {
      throw TruncatedError(context_ + ": truncated data (need " + std::to_string(count) + " x " +
                           std::to_string(elem_size) + " bytes, have " +
                           std::to_string(remaining()) + ")");
    }
  }

  std::size_t remaining() const { return buf_.size() - pos_; }
  const std::string& context() const { return context_; }

 private:
  void require(std::size_t n) const {
    if (remaining() < n) {
      throw TruncatedError(context_ + ": truncated header");
    }
  }

  const std::vector<char>& buf_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<char>& bytes);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace probekit::detail
