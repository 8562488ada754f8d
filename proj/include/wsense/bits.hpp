#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsense {

/// Thrown by readers when a field runs past the end of the buffer or holds an
/// impossible value. `offset()` is the byte offset of the offending field.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& what);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

[[noreturn]] void throw_truncated(std::size_t offset, unsigned nbytes);

// Little-endian fixed-width integers.
inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, unsigned nbytes) {
  for (unsigned i = 0; i < nbytes; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, unsigned nbytes) {
  if (offset + nbytes > in.size()) throw_truncated(offset, nbytes);
  std::uint64_t v = 0;
  for (unsigned i = 0; i < nbytes; ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
  return v;
}

/// MSB-first bit packer appending to a byte vector.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  ~BitWriter() { flush(); }
  BitWriter(const BitWriter&) = delete;
  BitWriter& operator=(const BitWriter&) = delete;

  void put(std::uint64_t value, unsigned width);
  /// Pads the trailing partial byte with zero bits.
  void flush();

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t acc_ = 0;
  unsigned pending_ = 0;
};

/// MSB-first bit reader over a byte region. Reads beyond the region throw
/// DecodeError with the byte offset relative to `base_offset`.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> region, std::size_t base_offset)
      : region_(region), base_(base_offset) {}

  std::uint64_t get(unsigned width);
  std::size_t bit_position() const noexcept { return bitpos_; }

 private:
  std::span<const std::uint8_t> region_;
  std::size_t base_;
  std::size_t bitpos_ = 0;
};

constexpr std::size_t bytes_for_bits(std::size_t bits) { return (bits + 7) / 8; }

/// Smallest w with 2^w >= n (0 for n <= 1).
constexpr unsigned ceil_log2(std::uint64_t n) {
  unsigned w = 0;
  while (w < 64 && (std::uint64_t{1} << w) < n) ++w;
  return w;
}

}  // namespace wsense
