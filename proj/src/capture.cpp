#include "wsense/capture.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

#include "wsense/bits.hpp"

namespace wsense {

std::vector<std::uint8_t> serialize_capture(const std::vector<CapturedPacket>& packets) {
  std::vector<std::uint8_t> out;
  for (const auto& p : packets) {
    if (p.bytes.size() > 0xFFFF) throw std::invalid_argument("captured packet longer than 65535 bytes");
    put_le(out, p.bytes.size(), 2);
    put_le(out, p.recv_time_ns, 8);
    put_le(out, p.source_id, 2);
    out.insert(out.end(), p.bytes.begin(), p.bytes.end());
  }
  return out;
}

std::vector<CapturedPacket> parse_capture(const std::vector<std::uint8_t>& data) {
  std::vector<CapturedPacket> out;
  std::size_t off = 0;
  while (off < data.size()) {
    const auto len = get_le(data, off, 2);
    CapturedPacket p;
    p.recv_time_ns = get_le(data, off + 2, 8);
    p.source_id = static_cast<std::uint16_t>(get_le(data, off + 10, 2));
    off += 12;
    if (off + len > data.size()) throw DecodeError(off, "captured packet body truncated");
    p.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(off),
                   data.begin() + static_cast<std::ptrdiff_t>(off + len));
    off += len;
    out.push_back(std::move(p));
  }
  return out;
}

void write_capture(const std::filesystem::path& path, const std::vector<CapturedPacket>& packets) {
  const auto buf = serialize_capture(packets);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::vector<CapturedPacket> read_capture(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_capture(buf);
}

}  // namespace wsense
