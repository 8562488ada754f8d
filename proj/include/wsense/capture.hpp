#pragma once

// Packet capture file: repeated [length(2) | recv_time_ns(8) | source_id(2) | bytes].

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wsense {

struct CapturedPacket {
  std::uint64_t recv_time_ns = 0;
  std::uint16_t source_id = 0;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const CapturedPacket&, const CapturedPacket&) = default;
};

void write_capture(const std::filesystem::path& path, const std::vector<CapturedPacket>& packets);
/// Throws DecodeError on a truncated record.
std::vector<CapturedPacket> read_capture(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_capture(const std::vector<CapturedPacket>& packets);
std::vector<CapturedPacket> parse_capture(const std::vector<std::uint8_t>& data);

}  // namespace wsense
