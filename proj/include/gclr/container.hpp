#pragma once

// Little-endian binary container: 4-byte magic, u32 version, payload, then a
// CRC32 over every preceding byte.

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gclr/errors.hpp"

namespace gclr::io {

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void put_f64s(std::span<const double> v) {
    for (double x : v) put_f64(x);
  }
  void put_string(std::string_view s) {
    put_u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(std::span<const std::uint8_t> raw) {
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }
  // Length-prefixed vector.
  void put_vector(std::span<const double> v) {
    put_u64(v.size());
    put_f64s(v);
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int b = 0; b < width; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t get_u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t get_u64() { return get_le(8); }
  double get_f64() { return std::bit_cast<double>(get_le(8)); }
  void get_f64s(std::span<double> out) {
    for (double& x : out) x = get_f64();
  }
  std::string get_string() {
    const std::uint64_t n = get_u64();
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_vector() {
    const std::uint64_t n = get_u64();
    require(n * 8);
    std::vector<double> v(n);
    get_f64s(v);
    return v;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw FormatError("container: trailing bytes in payload");
  }

 private:
  void require(std::uint64_t n) const {
    if (n > remaining()) throw FormatError("container: truncated payload");
  }
  std::uint64_t get_le(int width) {
    require(static_cast<std::uint64_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += width;
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

using Magic = std::array<char, 4>;

inline std::vector<std::uint8_t> seal(const Magic& magic, std::uint32_t version,
                                      std::span<const std::uint8_t> payload) {
  ByteWriter w;
  for (char c : magic) w.put_u8(static_cast<std::uint8_t>(c));
  w.put_u32(version);
  w.put_raw(payload);
  const std::uint32_t crc = crc32_of(w.bytes());
  w.put_u32(crc);
  return w.take();
}

// Validates framing and checksum; returns the payload.
inline std::vector<std::uint8_t> unseal(std::span<const std::uint8_t> file, const Magic& magic,
                                        std::uint32_t version) {
  if (file.empty()) throw FormatError("container: empty file");
  if (file.size() < 12) throw FormatError("container: truncated header");
  if (std::memcmp(file.data(), magic.data(), 4) != 0) {
    throw FormatError("container: bad magic, expected '" + std::string(magic.data(), 4) + "'");
  }
  ByteReader header(file.subspan(4, 4));
  const std::uint32_t got_version = header.get_u32();
  if (got_version != version) {
    throw FormatError("container: version " + std::to_string(got_version) + ", expected " +
                      std::to_string(version));
  }
  const auto body = file.first(file.size() - 4);
  ByteReader trailer(file.last(4));
  if (crc32_of(body) != trailer.get_u32()) throw IntegrityError("container: CRC32 mismatch");
  return {body.begin() + 8, body.end()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gclr::io
