#include "wsense/bits.hpp"

#include <algorithm>

namespace wsense {

DecodeError::DecodeError(std::size_t offset, const std::string& what)
    : std::runtime_error("decode error at byte " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

void throw_truncated(std::size_t offset, unsigned nbytes) {
  throw DecodeError(offset, "truncated " + std::to_string(nbytes) + "-byte field");
}

void BitWriter::put(std::uint64_t value, unsigned width) {
  // Split wide writes so the 64-bit accumulator never overflows.
  while (width > 32) {
    width -= 32;
    put(value >> width, 32);
  }
  if (width == 0) return;
  value &= (std::uint64_t{1} << width) - 1;
  acc_ = (acc_ << width) | value;
  pending_ += width;
  while (pending_ >= 8) {
    pending_ -= 8;
    out_.push_back(static_cast<std::uint8_t>(acc_ >> pending_));
  }
  acc_ &= (std::uint64_t{1} << pending_) - 1;
}

void BitWriter::flush() {
  if (pending_ > 0) {
    out_.push_back(static_cast<std::uint8_t>(acc_ << (8 - pending_)));
    pending_ = 0;
    acc_ = 0;
  }
}

std::uint64_t BitReader::get(unsigned width) {
  if (bitpos_ + width > region_.size() * 8)
    throw DecodeError(base_ + bitpos_ / 8, "bit field runs past end of table");
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width;) {
    const std::size_t byte = bitpos_ / 8;
    const unsigned used = static_cast<unsigned>(bitpos_ % 8);
    const unsigned take = std::min(8 - used, width - i);
    const unsigned shift = 8 - used - take;
    const std::uint64_t bits = (region_[byte] >> shift) & ((1u << take) - 1);
    v = (v << take) | bits;
    bitpos_ += take;
    i += take;
  }
  return v;
}

}  // namespace wsense
