#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reslab {

using Bytes = std::string;

// FNV-1a over the input followed by a 64-bit avalanche finalizer. Stable across
// platforms and runs, which std::hash is not.
std::uint64_t stable_hash(std::string_view data);
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Little-endian fixed-width encoder used by every wire format in the repo.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u16(std::uint16_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& raw(std::string_view v);
  // u32 length prefix followed by the bytes.
  ByteWriter& blob(std::string_view v);

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::string_view raw(std::size_t len);
  std::string_view blob();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  std::string_view consumed() const { return data_.substr(0, pos_); }

 private:
  void need(std::size_t len) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace reslab
