#pragma once

// Server side: datagram reception, per-source reassembly of split pairs,
// sequence-gap accounting and persistence of the reconstructed samples.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsense/capture.hpp"
#include "wsense/codec.hpp"

namespace wsense::ingest {

using codec::Encoding;
using codec::SampleBatch;

struct EncodingStats {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  std::uint64_t samples = 0;
};

struct Counters {
  std::uint64_t datagrams = 0;      // everything offered, valid or not
  std::uint64_t packets = 0;        // decoded successfully
  std::uint64_t bytes = 0;          // of decoded packets
  std::uint64_t samples = 0;        // emitted records
  std::uint64_t units = 0;          // distinct sequence numbers accepted
  std::uint64_t losses = 0;         // sequence numbers never seen
  std::uint64_t decode_errors = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t late = 0;           // older than the newest sequence number
  std::uint64_t out_of_order = 0;   // decoded but timestamps went backwards
  std::uint64_t split_pairs = 0;
  std::uint64_t split_partial = 0;
  std::array<EncodingStats, 5> by_encoding{};
};

/// Reassembly state for one source. Not thread-safe; one instance per source.
class StreamAssembler {
 public:
  explicit StreamAssembler(std::optional<Encoding> headerless = std::nullopt) : headerless_(headerless) {}

  /// Returns the batches that became complete, in timestamp order. Malformed
  /// input is counted and skipped.
  std::vector<SampleBatch> ingest(std::span<const std::uint8_t> bytes, std::uint64_t recv_time_ns);
  /// Emits a held half whose sibling never arrived.
  std::vector<SampleBatch> flush();

  const Counters& counters() const { return c_; }
  /// Samples and bytes per second over the receive span, excluding the first
  /// packet's share. Absent with fewer than two packets.
  std::optional<double> samples_per_s() const;
  std::optional<double> bytes_per_s() const;

 private:
  struct Pending {
    std::uint16_t seq;
    std::array<std::optional<SampleBatch>, 2> halves;
  };

  void emit(SampleBatch batch, std::vector<SampleBatch>& out);
  void flush_into(std::vector<SampleBatch>& out);

  std::optional<Encoding> headerless_;
  Counters c_;
  std::optional<std::uint16_t> last_seq_;
  std::optional<Pending> pending_;
  std::optional<std::uint64_t> last_emitted_ts_;

  std::uint64_t first_recv_ = 0, last_recv_ = 0;
  std::uint64_t first_samples_ = 0, first_bytes_ = 0;
  std::uint64_t recv_samples_ = 0, recv_bytes_ = 0;
};

struct SourceReport {
  std::string name;
  Counters counters;
  std::optional<double> samples_per_s;
  std::optional<double> bytes_per_s;
  double loss_rate = 0;
};

struct Report {
  std::vector<SourceReport> sources;
  Counters total;
  std::optional<double> samples_per_s;  // summed over sources
  std::optional<double> bytes_per_s;
  double loss_rate = 0;
};

nlohmann::json to_json(const Counters& c);
nlohmann::json to_json(const Report& r);

/// Thread-safe front end over one assembler per source.
class Ingestor {
 public:
  using Sink = std::function<void(std::uint32_t source, const std::string& name, const SampleBatch&)>;

  explicit Ingestor(std::optional<Encoding> headerless = std::nullopt, Sink sink = {})
      : headerless_(headerless), sink_(std::move(sink)) {}

  void ingest(std::uint32_t source, std::span<const std::uint8_t> bytes, std::uint64_t recv_time_ns,
              const std::string& name = {});
  void flush();
  Report report() const;

 private:
  struct Source {
    std::string name;
    StreamAssembler assembler;
  };

  std::optional<Encoding> headerless_;
  Sink sink_;
  mutable std::mutex mu_;
  std::map<std::uint32_t, Source> sources_;
};

/// Feeds a capture through an Ingestor using the recorded receive times.
Report ingest_capture(const std::vector<CapturedPacket>& packets, std::optional<Encoding> headerless,
                      const Ingestor::Sink& sink = {});

enum class RecordFormat { raw, csv };

/// Append-only per-source record files, rotated once a file reaches
/// `rotate_bytes` (0 disables rotation).
class RecordWriter {
 public:
  RecordWriter(std::filesystem::path dir, RecordFormat format, std::uint64_t rotate_bytes = 0);
  void write(std::uint32_t source, const std::string& name, const SampleBatch& batch);
  std::vector<std::filesystem::path> files() const;

 private:
  struct File {
    std::ofstream out;
    std::uint64_t size = 0;
    int index = 0;
    std::string stem;
  };
  void open(File& f);

  std::filesystem::path dir_;
  RecordFormat format_;
  std::uint64_t rotate_bytes_;
  std::map<std::uint32_t, File> files_;
  std::vector<std::filesystem::path> created_;
};

/// Blocking UDP receiver. "host:port"; port 0 picks a free port.
class UdpServer {
 public:
  explicit UdpServer(const std::string& listen);
  ~UdpServer();
  UdpServer(const UdpServer&) = delete;
  UdpServer& operator=(const UdpServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Receives until `stop` is set or `max_datagrams` arrive. Source identity is
  /// the sender address. Receive times come from the monotonic clock.
  std::uint64_t serve(Ingestor& ingestor, const std::atomic<bool>& stop,
                      std::optional<std::uint64_t> max_datagrams = std::nullopt);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::map<std::string, std::uint32_t> ids_;
};

/// Sends each packet as one datagram, one socket per source id. When `paced`,
/// inter-send gaps follow the recorded receive times.
void udp_replay(const std::string& target, const std::vector<CapturedPacket>& packets, bool paced);

std::uint64_t monotonic_ns();

}  // namespace wsense::ingest
