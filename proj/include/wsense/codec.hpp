#pragma once

// Lossless timestamp encodings for sample batches.
//
// Five wire formats share one contract: decode(encode(batch)) reproduces the
// batch bit-exactly, and every emitted frame fits a 1472-byte UDP payload.
//
//   B8     seq(2) | s x [timestamp(8) | sample(2)]                 (no format header)
//   B6     prefix | s x [timestamp(6) | sample(2)]
//   IENC   prefix | c(2) | k(1) | base(6) | TST(c*k bits) | TIT(s*w bits) | samples
//   OENC   prefix | flags(1) | C1..C7 | TSTSize(2) | base(6) | TIT(s*3 bits) | TST | samples
//   DOENC  as OENC, TST holds signed (outlier - C1) deltas
//
//   prefix = seq(2) | type(1) | encoding(1) | s(2)
//
// Integers are little-endian; TIT/TST bit fields are packed MSB-first and padded
// to a byte boundary. TIT has one entry per sample; entry 0 is written as 0 and
// ignored because the first sample is anchored by the base time.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wsense/bits.hpp"

namespace wsense::codec {

inline constexpr std::size_t kMtuPayload = 1472;
inline constexpr std::size_t kPrefixBytes = 6;
inline constexpr std::size_t kB8HeaderBytes = 2;
inline constexpr std::size_t kMinBatch = 2;
inline constexpr std::size_t kMaxBatch = 4096;
inline constexpr std::size_t kMajorClasses = 7;
inline constexpr std::uint64_t kMax48 = (std::uint64_t{1} << 48) - 1;

enum class Encoding : std::uint8_t { B8 = 0, B6 = 1, IENC = 2, OENC = 3, DOENC = 4 };
enum class PacketType : std::uint8_t { single = 0, first = 1, second = 2 };

inline constexpr std::array<Encoding, 5> kAllEncodings{Encoding::B8, Encoding::B6, Encoding::IENC,
                                                       Encoding::OENC, Encoding::DOENC};

std::string_view to_string(Encoding e);
/// Accepts "b8", "baseline-8b", "ienc", "d-oenc", ... (case-insensitive).
std::optional<Encoding> parse_encoding(std::string_view name);
constexpr bool is_baseline(Encoding e) { return e == Encoding::B8 || e == Encoding::B6; }

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InvalidInput : public CodecError {
 public:
  using CodecError::CodecError;
};
class UnencodableInterval : public CodecError {
 public:
  using CodecError::CodecError;
};
/// Even the two-packet split exceeds the MTU payload.
class PayloadOverflow : public CodecError {
 public:
  using CodecError::CodecError;
};

struct SampleBatch {
  std::vector<std::uint16_t> samples;
  std::vector<std::uint64_t> timestamps;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  /// Samples [first, first + count).
  SampleBatch slice(std::size_t first, std::size_t count) const;
  void append(const SampleBatch& other);

  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

/// Validates the batch invariants and returns the s-1 inter-sample intervals.
/// Throws InvalidInput for size/ordering problems and UnencodableInterval when
/// an interval does not fit 32 bits.
std::vector<std::uint32_t> compute_intervals(const SampleBatch& batch);

struct IntervalClass {
  std::uint32_t interval_ns;
  std::uint32_t count;
  friend bool operator==(const IntervalClass&, const IntervalClass&) = default;
};

struct IntervalHistogram {
  std::vector<IntervalClass> entries;  // first-occurrence order
  int packet_count = 1;
  /// Number of samples the histogram covers (s, or s/2 after a split).
  std::size_t covered_samples = 0;

  std::size_t used() const noexcept { return entries.size(); }
};

struct ClassRanking {
  std::array<std::uint32_t, kMajorClasses> majors{};  // 0 for absent slots
  std::size_t count = 0;

  /// Index 0..6 of `interval` among the majors, or -1.
  int index_of(std::uint32_t interval) const noexcept {
    for (std::size_t i = 0; i < count; ++i)
      if (majors[i] == interval) return static_cast<int>(i);
    return -1;
  }
};

inline constexpr std::size_t kNoClassLimit = std::numeric_limits<std::size_t>::max();

/// Frequency table of the batch's intervals. When the number of distinct
/// classes exceeds `payload_limit_classes` the scan stops, packet_count becomes
/// 2 and the table is recomputed over the first s/2 samples.
IntervalHistogram classify_intervals(const SampleBatch& batch,
                                     std::size_t payload_limit_classes = kNoClassLimit);
IntervalHistogram classify_intervals(std::span<const std::uint32_t> intervals,
                                     std::size_t payload_limit_classes = kNoClassLimit);

/// Top seven classes by count; ties go to the earlier first occurrence.
ClassRanking rank_classes(const IntervalHistogram& hist);

/// Field widths that the size formula cannot infer from counts alone.
struct SizeParams {
  unsigned tst_bits = 16;     // IENC k
  unsigned class_bytes = 2;   // OENC/DOENC C1..C7 entries
  unsigned outlier_bytes = 2; // OENC TST entries
  unsigned delta_bytes = 1;   // DOENC TST entries
};

/// Exact size in bytes of one unsplit frame holding `s` samples.
/// class_count is used by IENC, outlier_count by OENC/DOENC; baselines use s only.
std::size_t packet_size(Encoding method, std::size_t s, std::size_t class_count,
                        std::size_t outlier_count, const SizeParams& params = {});

/// Largest number of samples a single baseline frame can carry.
std::size_t max_baseline_samples(Encoding method);

/// Largest class count (IENC) or distinct-class count assuming every class
/// past the seven majors occurs once (OENC) that keeps an s-sample frame
/// within the MTU. DOENC never recomputes its table, so it has no limit.
std::size_t payload_limit_classes(Encoding method, std::size_t s, const SizeParams& params = {});

struct EncodedPacket {
  std::uint16_t seq = 0;
  PacketType type = PacketType::single;
  Encoding encoding = Encoding::B8;
  std::vector<std::uint8_t> bytes;  // complete wire frame

  /// Sample count carried by the frame (read from the header / length).
  std::size_t sample_count() const;
};

/// Encodes a batch. Baselines are chunked into as many frames as needed with
/// consecutive sequence numbers; the compressed formats emit one frame or a
/// split pair sharing `seq`.
std::vector<EncodedPacket> encode(const SampleBatch& batch, Encoding method, std::uint16_t seq);

/// How far the sender's sequence counter advances after sending `packets`.
std::uint16_t seq_advance(std::span<const EncodedPacket> packets);

/// Decodes one frame on its own.
SampleBatch decode_packet(const EncodedPacket& packet);

/// Decodes one logical unit: [single], [first, second], a lone half, or a run
/// of baseline chunks. Output is the concatenation in sample order.
SampleBatch decode(std::span<const EncodedPacket> packets);

/// Reads the header of a received frame. Frames without a format header (B8)
/// are only recognised when `headerless` says so.
EncodedPacket parse_frame(std::span<const std::uint8_t> bytes,
                          std::optional<Encoding> headerless = std::nullopt);

}  // namespace wsense::codec
