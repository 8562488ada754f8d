#include "wsense/codec.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <numeric>

namespace wsense::codec {

namespace {

constexpr std::uint8_t kFlagWideClasses = 0x01;
constexpr std::uint8_t kFlagWideOutliers = 0x02;
constexpr std::uint8_t kDeltaWidthShift = 2;
constexpr std::uint8_t kDeltaWidthMask = 0x0C;
constexpr std::uint8_t kKnownFlags = kFlagWideClasses | kFlagWideOutliers | kDeltaWidthMask;
constexpr unsigned kOutlierIndex = 7;

constexpr std::size_t kIencFixed = kPrefixBytes + 2 + 1 + 6;
constexpr std::size_t kOencFixed = kPrefixBytes + 1 + 2 + 6;  // plus class table

struct BatchView {
  std::span<const std::uint16_t> samples;
  std::span<const std::uint64_t> timestamps;
  std::span<const std::uint32_t> intervals;  // samples.size() - 1 entries

  std::size_t size() const { return samples.size(); }

  BatchView sub(std::size_t first, std::size_t count) const {
    return {samples.subspan(first, count), timestamps.subspan(first, count),
            count > 0 ? intervals.subspan(first, count - 1) : intervals.subspan(0, 0)};
  }
};

// Open-addressing map from interval to class index. Intervals are never 0, so
// 0 marks an empty slot.
class ClassTable {
 public:
  explicit ClassTable(std::size_t expected) {
    std::size_t cap = 16;
    while (cap < expected * 2) cap <<= 1;
    entries_.assign(cap, {0, 0});
    mask_ = cap - 1;
  }

  // Returns the class index, inserting `next_index` when the key is new.
  std::uint32_t find_or_insert(std::uint32_t key, std::uint32_t next_index, bool& inserted) {
    std::size_t h = (key * 0x9E3779B1u) & mask_;
    while (true) {
      auto& [k, slot] = entries_[h];
      if (k == key) {
        inserted = false;
        return slot;
      }
      if (k == 0) {
        k = key;
        slot = next_index;
        inserted = true;
        return next_index;
      }
      h = (h + 1) & mask_;
    }
  }

 private:
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries_;
  std::size_t mask_ = 0;
};

// Full histogram plus the class index of every interval.
IntervalHistogram histogram_with_indices(std::span<const std::uint32_t> intervals,
                                         std::vector<std::uint32_t>* indices) {
  IntervalHistogram hist;
  hist.covered_samples = intervals.size() + 1;
  ClassTable table(intervals.size());
  hist.entries.reserve(std::min<std::size_t>(intervals.size(), 64));
  if (indices) indices->resize(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    bool inserted = false;
    const auto idx =
        table.find_or_insert(intervals[i], static_cast<std::uint32_t>(hist.entries.size()), inserted);
    if (inserted)
      hist.entries.push_back({intervals[i], 1});
    else
      ++hist.entries[idx].count;
    if (indices) (*indices)[i] = idx;
  }
  return hist;
}

unsigned value_bits(std::uint32_t v) { return std::max(1u, static_cast<unsigned>(std::bit_width(v))); }

unsigned tit_width(std::size_t classes) {
  return std::max(1u, ceil_log2(classes));
}

void write_prefix(std::vector<std::uint8_t>& out, std::uint16_t seq, PacketType type, Encoding enc,
                  std::size_t s) {
  put_le(out, seq, 2);
  out.push_back(static_cast<std::uint8_t>(type));
  out.push_back(static_cast<std::uint8_t>(enc));
  put_le(out, s, 2);
}

void write_samples(std::vector<std::uint8_t>& out, std::span<const std::uint16_t> samples) {
  const std::size_t at = out.size();
  out.resize(at + 2 * samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[at + 2 * i] = static_cast<std::uint8_t>(samples[i]);
    out[at + 2 * i + 1] = static_cast<std::uint8_t>(samples[i] >> 8);
  }
}

EncodedPacket make_packet(std::uint16_t seq, PacketType type, Encoding enc,
                          std::vector<std::uint8_t> bytes) {
  EncodedPacket p;
  p.seq = seq;
  p.type = type;
  p.encoding = enc;
  p.bytes = std::move(bytes);
  return p;
}

void check_base_time(std::uint64_t t) {
  if (t > kMax48)
    throw InvalidInput("timestamp " + std::to_string(t) + " ns does not fit the 6-byte time field");
}

// ---- IENC ------------------------------------------------------------------

struct IencPlan {
  IntervalHistogram hist;
  std::vector<std::uint32_t> indices;
  unsigned k = 1;
  std::size_t size = 0;
};

IencPlan plan_ienc(const BatchView& v) {
  IencPlan plan;
  plan.hist = histogram_with_indices(v.intervals, &plan.indices);
  std::uint32_t max_value = 0;
  for (const auto& e : plan.hist.entries) max_value = std::max(max_value, e.interval_ns);
  plan.k = value_bits(max_value);
  plan.size = packet_size(Encoding::IENC, v.size(), plan.hist.used(), 0, SizeParams{.tst_bits = plan.k});
  return plan;
}

EncodedPacket write_ienc(const BatchView& v, const IencPlan& plan, std::uint16_t seq, PacketType type) {
  std::vector<std::uint8_t> out;
  out.reserve(plan.size);
  write_prefix(out, seq, type, Encoding::IENC, v.size());
  put_le(out, plan.hist.used(), 2);
  out.push_back(static_cast<std::uint8_t>(plan.k));
  put_le(out, v.timestamps.front(), 6);
  {
    BitWriter bw(out);
    for (const auto& e : plan.hist.entries) bw.put(e.interval_ns, plan.k);
  }
  {
    BitWriter bw(out);
    const unsigned w = tit_width(plan.hist.used());
    bw.put(0, w);
    for (auto idx : plan.indices) bw.put(idx, w);
  }
  write_samples(out, v.samples);
  return make_packet(seq, type, Encoding::IENC, std::move(out));
}

// ---- OENC / DOENC -------------------------------------------------------------

struct OutlierPlan {
  ClassRanking ranking;
  std::uint8_t flags = 0;
  unsigned class_bytes = 2;
  unsigned tst_bytes = 2;
  std::vector<std::uint32_t> outliers;  // batch order
  std::size_t size = 0;
};

unsigned delta_bytes_for(std::span<const std::uint32_t> outliers, std::uint32_t c1) {
  unsigned width = 1;
  for (auto o : outliers) {
    const std::int64_t d = std::int64_t{o} - std::int64_t{c1};
    if (d < -32768 || d > 32767) return 4;
    if (d < -128 || d > 127) width = 2;
  }
  return width;
}

OutlierPlan plan_outliers(const BatchView& v, Encoding enc, const ClassRanking& ranking) {
  OutlierPlan plan;
  plan.ranking = ranking;
  plan.outliers.reserve(v.intervals.size());
  for (std::size_t i = 0; i < ranking.count; ++i)
    if (ranking.majors[i] > 0xFFFF) plan.class_bytes = 4;
  for (auto iv : v.intervals)
    if (ranking.index_of(iv) < 0) plan.outliers.push_back(iv);

  if (plan.class_bytes == 4) plan.flags |= kFlagWideClasses;
  if (enc == Encoding::OENC) {
    for (auto o : plan.outliers)
      if (o > 0xFFFF) plan.tst_bytes = 4;
    if (plan.tst_bytes == 4) plan.flags |= kFlagWideOutliers;
  } else {
    plan.tst_bytes = delta_bytes_for(plan.outliers, ranking.majors[0]);
    const std::uint8_t code = plan.tst_bytes == 1 ? 0 : plan.tst_bytes == 2 ? 1 : 2;
    plan.flags |= static_cast<std::uint8_t>(code << kDeltaWidthShift);
  }
  SizeParams sp;
  sp.class_bytes = plan.class_bytes;
  sp.outlier_bytes = plan.tst_bytes;
  sp.delta_bytes = plan.tst_bytes;
  plan.size = packet_size(enc, v.size(), 0, plan.outliers.size(), sp);
  return plan;
}

EncodedPacket write_outlier_frame(const BatchView& v, Encoding enc, const OutlierPlan& plan,
                                  std::uint16_t seq, PacketType type) {
  std::vector<std::uint8_t> out;
  out.reserve(plan.size);
  write_prefix(out, seq, type, enc, v.size());
  out.push_back(plan.flags);
  for (auto m : plan.ranking.majors) put_le(out, m, plan.class_bytes);
  put_le(out, plan.outliers.size(), 2);
  put_le(out, v.timestamps.front(), 6);
  {
    BitWriter bw(out);
    bw.put(0, 3);
    for (auto iv : v.intervals) {
      const int idx = plan.ranking.index_of(iv);
      bw.put(idx < 0 ? kOutlierIndex : static_cast<unsigned>(idx), 3);
    }
  }
  const std::uint32_t c1 = plan.ranking.majors[0];
  for (auto o : plan.outliers) {
    if (enc == Encoding::OENC) {
      put_le(out, o, plan.tst_bytes);
    } else {
      // Two's complement of the difference; 4-byte deltas wrap modulo 2^32.
      const auto delta = static_cast<std::uint32_t>(o - c1);
      put_le(out, delta, plan.tst_bytes);
    }
  }
  write_samples(out, v.samples);
  return make_packet(seq, type, enc, std::move(out));
}

std::vector<EncodedPacket> single(EncodedPacket p) {
  std::vector<EncodedPacket> out;
  out.push_back(std::move(p));
  return out;
}

std::vector<EncodedPacket> encode_halves_ienc(const BatchView& v, std::uint16_t seq) {
  const std::size_t h = v.size() / 2;
  std::vector<EncodedPacket> out;
  const BatchView halves[2] = {v.sub(0, h), v.sub(h, v.size() - h)};
  const PacketType types[2] = {PacketType::first, PacketType::second};
  for (int i = 0; i < 2; ++i) {
    const auto plan = plan_ienc(halves[i]);
    if (plan.size > kMtuPayload)
      throw PayloadOverflow("IENC half of " + std::to_string(halves[i].size()) + " samples needs " +
                            std::to_string(plan.size) + " bytes");
    out.push_back(write_ienc(halves[i], plan, seq, types[i]));
  }
  return out;
}

std::vector<EncodedPacket> encode_halves_outlier(const BatchView& v, Encoding enc, std::uint16_t seq,
                                                 const ClassRanking* shared_ranking) {
  const std::size_t h = v.size() / 2;
  std::vector<EncodedPacket> out;
  const BatchView halves[2] = {v.sub(0, h), v.sub(h, v.size() - h)};
  const PacketType types[2] = {PacketType::first, PacketType::second};
  for (int i = 0; i < 2; ++i) {
    const ClassRanking ranking =
        shared_ranking ? *shared_ranking : rank_classes(classify_intervals(halves[i].intervals));
    const auto plan = plan_outliers(halves[i], enc, ranking);
    if (plan.size > kMtuPayload)
      throw PayloadOverflow(std::string(to_string(enc)) + " half of " +
                            std::to_string(halves[i].size()) + " samples needs " +
                            std::to_string(plan.size) + " bytes");
    out.push_back(write_outlier_frame(halves[i], enc, plan, seq, types[i]));
  }
  return out;
}

std::vector<EncodedPacket> encode_baseline(const SampleBatch& batch, Encoding enc, std::uint16_t seq) {
  const std::size_t per = max_baseline_samples(enc);
  const unsigned ts_bytes = enc == Encoding::B8 ? 8 : 6;
  if (enc == Encoding::B6)
    for (auto t : batch.timestamps) check_base_time(t);
  std::vector<EncodedPacket> out;
  for (std::size_t first = 0; first < batch.size(); first += per) {
    const std::size_t n = std::min(per, batch.size() - first);
    std::vector<std::uint8_t> bytes;
    bytes.reserve(packet_size(enc, n, 0, 0));
    if (enc == Encoding::B8)
      put_le(bytes, seq, 2);
    else
      write_prefix(bytes, seq, PacketType::single, enc, n);
    for (std::size_t i = first; i < first + n; ++i) {
      put_le(bytes, batch.timestamps[i], ts_bytes);
      put_le(bytes, batch.samples[i], 2);
    }
    out.push_back(make_packet(seq, PacketType::single, enc, std::move(bytes)));
    ++seq;
  }
  return out;
}

// ---- decoding -----------------------------------------------------------------

SampleBatch decode_baseline(std::span<const std::uint8_t> b, Encoding enc) {
  SampleBatch out;
  std::size_t n = 0;
  std::size_t off = 0;
  unsigned ts_bytes = 8;
  if (enc == Encoding::B8) {
    if (b.size() < kB8HeaderBytes + 10 || (b.size() - kB8HeaderBytes) % 10 != 0)
      throw DecodeError(b.size(), "B8 frame length is not 2 + 10*n");
    n = (b.size() - kB8HeaderBytes) / 10;
    off = kB8HeaderBytes;
  } else {
    n = get_le(b, 4, 2);
    ts_bytes = 6;
    off = kPrefixBytes;
    if (n == 0) throw DecodeError(4, "frame holds no samples");
    if (b.size() != kPrefixBytes + 8 * n)
      throw DecodeError(std::min(b.size(), kPrefixBytes + 8 * n), "B6 payload length mismatch");
  }
  out.samples.resize(n);
  out.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.timestamps[i] = get_le(b, off, ts_bytes);
    out.samples[i] = static_cast<std::uint16_t>(get_le(b, off + ts_bytes, 2));
    if (i > 0 && out.timestamps[i] <= out.timestamps[i - 1])
      throw DecodeError(off, "timestamps not strictly increasing");
    off += ts_bytes + 2;
  }
  return out;
}

void read_samples(std::span<const std::uint8_t> b, std::size_t off, SampleBatch& out) {
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = static_cast<std::uint16_t>(get_le(b, off + 2 * i, 2));
}

void expect_length(std::span<const std::uint8_t> b, std::size_t expected) {
  if (b.size() < expected) throw DecodeError(b.size(), "frame truncated, expected " + std::to_string(expected) + " bytes");
  if (b.size() > expected) throw DecodeError(expected, "trailing bytes after samples");
}

SampleBatch decode_ienc(std::span<const std::uint8_t> b, std::size_t s) {
  const std::size_t c = get_le(b, 6, 2);
  const unsigned k = static_cast<unsigned>(get_le(b, 8, 1));
  const std::uint64_t base = get_le(b, 9, 6);
  if (k == 0 || k > 32) throw DecodeError(8, "TST entry width k out of range");
  if ((s >= 2) != (c >= 1) || c > s) throw DecodeError(6, "class count inconsistent with batch size");
  const unsigned w = tit_width(c);
  const std::size_t tst_off = kIencFixed;
  const std::size_t tst_len = bytes_for_bits(c * k);
  const std::size_t tit_off = tst_off + tst_len;
  const std::size_t tit_len = bytes_for_bits(s * w);
  const std::size_t samples_off = tit_off + tit_len;
  expect_length(b, samples_off + 2 * s);

  std::vector<std::uint32_t> classes(c);
  BitReader tst(b.subspan(tst_off, tst_len), tst_off);
  for (auto& v : classes) {
    v = static_cast<std::uint32_t>(tst.get(k));
    if (v == 0) throw DecodeError(tst_off + tst.bit_position() / 8, "zero interval class");
  }

  SampleBatch out;
  out.samples.resize(s);
  out.timestamps.resize(s);
  BitReader tit(b.subspan(tit_off, tit_len), tit_off);
  tit.get(w);
  out.timestamps[0] = base;
  for (std::size_t i = 1; i < s; ++i) {
    const auto idx = tit.get(w);
    if (idx >= c) throw DecodeError(tit_off + (tit.bit_position() - 1) / 8, "TIT index beyond TST");
    out.timestamps[i] = out.timestamps[i - 1] + classes[idx];
  }
  read_samples(b, samples_off, out);
  return out;
}

SampleBatch decode_outlier(std::span<const std::uint8_t> b, std::size_t s, Encoding enc) {
  const auto flags = static_cast<std::uint8_t>(get_le(b, 6, 1));
  if (flags & ~kKnownFlags) throw DecodeError(6, "unknown format flags");
  const unsigned class_bytes = (flags & kFlagWideClasses) ? 4 : 2;
  unsigned tst_bytes = 2;
  if (enc == Encoding::OENC) {
    if (flags & kDeltaWidthMask) throw DecodeError(6, "delta width flags set on OENC frame");
    tst_bytes = (flags & kFlagWideOutliers) ? 4 : 2;
  } else {
    if (flags & kFlagWideOutliers) throw DecodeError(6, "outlier width flag set on D-OENC frame");
    const unsigned code = (flags & kDeltaWidthMask) >> kDeltaWidthShift;
    if (code > 2) throw DecodeError(6, "reserved delta width");
    tst_bytes = 1u << code;
  }
  std::size_t off = 7;
  std::array<std::uint32_t, kMajorClasses> majors{};
  for (auto& m : majors) {
    m = static_cast<std::uint32_t>(get_le(b, off, class_bytes));
    off += class_bytes;
  }
  const std::size_t n_out = get_le(b, off, 2);
  const std::uint64_t base = get_le(b, off + 2, 6);
  const std::size_t tit_off = off + 8;
  const std::size_t tit_len = bytes_for_bits(3 * s);
  const std::size_t tst_off = tit_off + tit_len;
  const std::size_t samples_off = tst_off + n_out * tst_bytes;
  if (n_out > s) throw DecodeError(off, "TST size larger than batch");
  expect_length(b, samples_off + 2 * s);

  SampleBatch out;
  out.samples.resize(s);
  out.timestamps.resize(s);
  out.timestamps[0] = base;
  BitReader tit(b.subspan(tit_off, tit_len), tit_off);
  tit.get(3);
  std::size_t next_outlier = 0;
  for (std::size_t i = 1; i < s; ++i) {
    const auto idx = static_cast<unsigned>(tit.get(3));
    const std::size_t at = tit_off + (tit.bit_position() - 1) / 8;
    std::uint32_t interval = 0;
    if (idx == kOutlierIndex) {
      if (next_outlier >= n_out) throw DecodeError(at, "TIT outlier index with exhausted TST");
      const std::size_t o = tst_off + next_outlier * tst_bytes;
      const auto raw = static_cast<std::uint32_t>(get_le(b, o, tst_bytes));
      ++next_outlier;
      if (enc == Encoding::OENC) {
        interval = raw;
      } else {
        std::int64_t delta = raw;
        if (tst_bytes < 4) {
          const std::int64_t half = std::int64_t{1} << (8 * tst_bytes - 1);
          if (delta >= half) delta -= 2 * half;
          const std::int64_t v = std::int64_t{majors[0]} + delta;
          if (v <= 0 || v > 0xFFFFFFFFll) throw DecodeError(o, "delta leaves the interval range");
          interval = static_cast<std::uint32_t>(v);
        } else {
          interval = majors[0] + raw;  // modulo 2^32
        }
      }
    } else {
      interval = majors[idx];
    }
    if (interval == 0) throw DecodeError(at, "TIT index refers to an absent class");
    out.timestamps[i] = out.timestamps[i - 1] + interval;
  }
  if (next_outlier != n_out) throw DecodeError(tst_off + next_outlier * tst_bytes, "unused TST entries");
  read_samples(b, samples_off, out);
  return out;
}

}  // namespace

// ---- names -----------------------------------------------------------------------

std::string_view to_string(Encoding e) {
  switch (e) {
    case Encoding::B8: return "B8";
    case Encoding::B6: return "B6";
    case Encoding::IENC: return "IENC";
    case Encoding::OENC: return "OENC";
    case Encoding::DOENC: return "DOENC";
  }
  return "?";
}

std::optional<Encoding> parse_encoding(std::string_view name) {
  std::string key;
  for (char ch : name)
    if (ch != '-' && ch != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (key == "b8" || key == "baseline8b") return Encoding::B8;
  if (key == "b6" || key == "baseline6b") return Encoding::B6;
  if (key == "ienc") return Encoding::IENC;
  if (key == "oenc") return Encoding::OENC;
  if (key == "doenc") return Encoding::DOENC;
  return std::nullopt;
}

// ---- batches ---------------------------------------------------------------------

SampleBatch SampleBatch::slice(std::size_t first, std::size_t count) const {
  SampleBatch out;
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(first),
                     samples.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

void SampleBatch::append(const SampleBatch& other) {
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
  timestamps.insert(timestamps.end(), other.timestamps.begin(), other.timestamps.end());
}

namespace {

// Checks the batch and calls emit(i, interval) for each interval.
template <class Emit>
void walk_intervals(const SampleBatch& batch, Emit emit) {
  if (batch.samples.size() != batch.timestamps.size())
    throw InvalidInput("samples and timestamps differ in length");
  const std::size_t s = batch.size();
  if (s < kMinBatch || s > kMaxBatch)
    throw InvalidInput("batch size " + std::to_string(s) + " outside [2, 4096]");
  for (std::size_t i = 1; i < s; ++i) {
    if (batch.timestamps[i] <= batch.timestamps[i - 1])
      throw InvalidInput("timestamps not strictly increasing at sample " + std::to_string(i));
    const std::uint64_t d = batch.timestamps[i] - batch.timestamps[i - 1];
    if (d > 0xFFFFFFFFull)
      throw UnencodableInterval("interval of " + std::to_string(d) + " ns at sample " +
                                std::to_string(i) + " exceeds 32 bits");
    emit(i - 1, static_cast<std::uint32_t>(d));
  }
}

}  // namespace

std::vector<std::uint32_t> compute_intervals(const SampleBatch& batch) {
  std::vector<std::uint32_t> intervals(batch.size() > 0 ? batch.size() - 1 : 0);
  walk_intervals(batch, [&](std::size_t i, std::uint32_t d) { intervals[i] = d; });
  return intervals;
}

// ---- classification ------------------------------------------------------------

IntervalHistogram classify_intervals(std::span<const std::uint32_t> intervals,
                                     std::size_t payload_limit_classes) {
  IntervalHistogram hist;
  hist.covered_samples = intervals.size() + 1;
  ClassTable table(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    bool inserted = false;
    const auto idx =
        table.find_or_insert(intervals[i], static_cast<std::uint32_t>(hist.entries.size()), inserted);
    if (!inserted) {
      ++hist.entries[idx].count;
      continue;
    }
    if (hist.entries.size() + 1 > payload_limit_classes) {
      const std::size_t half_samples = (intervals.size() + 1) / 2;
      auto half = histogram_with_indices(intervals.first(half_samples - 1), nullptr);
      half.packet_count = 2;
      return half;
    }
    hist.entries.push_back({intervals[i], 1});
  }
  return hist;
}

IntervalHistogram classify_intervals(const SampleBatch& batch, std::size_t payload_limit_classes) {
  const auto intervals = compute_intervals(batch);
  return classify_intervals(intervals, payload_limit_classes);
}

ClassRanking rank_classes(const IntervalHistogram& hist) {
  std::vector<std::size_t> order(hist.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t top = std::min(kMajorClasses, order.size());
  // Entries are in first-occurrence order, so a stable sort keeps the tie-break.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return hist.entries[a].count > hist.entries[b].count;
  });
  ClassRanking r;
  r.count = top;
  for (std::size_t i = 0; i < top; ++i) r.majors[i] = hist.entries[order[i]].interval_ns;
  return r;
}

// ---- sizes -----------------------------------------------------------------------------

std::size_t packet_size(Encoding method, std::size_t s, std::size_t class_count,
                        std::size_t outlier_count, const SizeParams& p) {
  switch (method) {
    case Encoding::B8: return kB8HeaderBytes + 10 * s;
    case Encoding::B6: return kPrefixBytes + 8 * s;
    case Encoding::IENC:
      return kIencFixed + bytes_for_bits(class_count * p.tst_bits) +
             bytes_for_bits(s * tit_width(class_count)) + 2 * s;
    case Encoding::OENC:
      return kOencFixed + kMajorClasses * p.class_bytes + bytes_for_bits(3 * s) +
             outlier_count * p.outlier_bytes + 2 * s;
    case Encoding::DOENC:
      return kOencFixed + kMajorClasses * p.class_bytes + bytes_for_bits(3 * s) +
             outlier_count * p.delta_bytes + 2 * s;
  }
  return 0;
}

std::size_t max_baseline_samples(Encoding method) {
  if (!is_baseline(method)) throw InvalidInput("not a baseline encoding");
  std::size_t n = 0;
  while (packet_size(method, n + 1, 0, 0) <= kMtuPayload) ++n;
  return n;
}

std::size_t payload_limit_classes(Encoding method, std::size_t s, const SizeParams& params) {
  const std::size_t intervals = s > 0 ? s - 1 : 0;
  // Largest n in [0, hi] with fits(n); sizes grow monotonically in n.
  auto largest = [](std::size_t hi, auto fits) {
    std::size_t lo = 0;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo + 1) / 2;
      if (fits(mid)) lo = mid;
      else hi = mid - 1;
    }
    return lo;
  };
  if (method == Encoding::IENC)
    return largest(intervals, [&](std::size_t c) { return packet_size(method, s, c, 0, params) <= kMtuPayload; });
  if (method == Encoding::OENC) {
    const std::size_t max_out = intervals > kMajorClasses ? intervals - kMajorClasses : 0;
    return kMajorClasses +
           largest(max_out, [&](std::size_t n) { return packet_size(method, s, 0, n, params) <= kMtuPayload; });
  }
  return kNoClassLimit;
}

// ---- encode / decode --------------------------------------------------------------------

std::size_t EncodedPacket::sample_count() const {
  if (encoding == Encoding::B8) return bytes.size() >= kB8HeaderBytes ? (bytes.size() - kB8HeaderBytes) / 10 : 0;
  return bytes.size() >= kPrefixBytes ? static_cast<std::size_t>(bytes[4] | (bytes[5] << 8)) : 0;
}

std::vector<EncodedPacket> encode(const SampleBatch& batch, Encoding method, std::uint16_t seq) {
  if (is_baseline(method)) {
    walk_intervals(batch, [](std::size_t, std::uint32_t) {});
    return encode_baseline(batch, method, seq);
  }
  const auto intervals = compute_intervals(batch);

  const BatchView view{batch.samples, batch.timestamps, intervals};
  const std::size_t s = batch.size();
  check_base_time(batch.timestamps.front());
  check_base_time(batch.timestamps[s / 2]);

  if (method == Encoding::IENC) {
    std::uint32_t max_interval = 0;
    for (auto v : intervals) max_interval = std::max(max_interval, v);
    const auto limit = payload_limit_classes(Encoding::IENC, s, SizeParams{.tst_bits = value_bits(max_interval)});
    const auto plan = plan_ienc(view);
    if (plan.hist.used() > limit || plan.size > kMtuPayload) return encode_halves_ienc(view, seq);
    return single(write_ienc(view, plan, seq, PacketType::single));
  }

  if (method == Encoding::OENC) {
    const auto hist = classify_intervals(intervals, payload_limit_classes(Encoding::OENC, s));
    if (hist.packet_count == 2) return encode_halves_outlier(view, method, seq, nullptr);
    const auto plan = plan_outliers(view, method, rank_classes(hist));
    if (plan.size > kMtuPayload) return encode_halves_outlier(view, method, seq, nullptr);
    return single(write_outlier_frame(view, method, plan, seq, PacketType::single));
  }

  // D-OENC keeps the batch-wide ranking for both halves of a split.
  const auto ranking = rank_classes(classify_intervals(intervals));
  const auto plan = plan_outliers(view, method, ranking);
  if (plan.size > kMtuPayload) return encode_halves_outlier(view, method, seq, &ranking);
  return single(write_outlier_frame(view, method, plan, seq, PacketType::single));
}

std::uint16_t seq_advance(std::span<const EncodedPacket> packets) {
  if (packets.empty()) return 0;
  if (is_baseline(packets.front().encoding)) return static_cast<std::uint16_t>(packets.size());
  return 1;
}

EncodedPacket parse_frame(std::span<const std::uint8_t> bytes, std::optional<Encoding> headerless) {
  EncodedPacket p;
  p.bytes.assign(bytes.begin(), bytes.end());
  if (headerless) {
    if (*headerless != Encoding::B8) throw DecodeError(0, "only B8 frames are headerless");
    p.seq = static_cast<std::uint16_t>(get_le(bytes, 0, 2));
    p.encoding = Encoding::B8;
    p.type = PacketType::single;
    return p;
  }
  if (bytes.size() < kPrefixBytes) throw DecodeError(bytes.size(), "frame shorter than the common prefix");
  p.seq = static_cast<std::uint16_t>(get_le(bytes, 0, 2));
  if (bytes[2] > 2) throw DecodeError(2, "packet type out of range");
  p.type = static_cast<PacketType>(bytes[2]);
  if (bytes[3] < 1 || bytes[3] > 4) throw DecodeError(3, "unknown encoding id");
  p.encoding = static_cast<Encoding>(bytes[3]);
  if (p.encoding == Encoding::B6 && p.type != PacketType::single) throw DecodeError(2, "baseline frame marked as split");
  return p;
}

SampleBatch decode_packet(const EncodedPacket& packet) {
  std::span<const std::uint8_t> b = packet.bytes;
  if (packet.encoding == Encoding::B8) return decode_baseline(b, Encoding::B8);
  if (b.size() < kPrefixBytes) throw DecodeError(b.size(), "frame shorter than the common prefix");
  if (b[3] != static_cast<std::uint8_t>(packet.encoding)) throw DecodeError(3, "encoding id does not match");
  if (b[2] > 2) throw DecodeError(2, "packet type out of range");
  const std::size_t s = get_le(b, 4, 2);
  if (s == 0) throw DecodeError(4, "frame holds no samples");
  switch (packet.encoding) {
    case Encoding::B6: return decode_baseline(b, Encoding::B6);
    case Encoding::IENC: return decode_ienc(b, s);
    case Encoding::OENC:
    case Encoding::DOENC: return decode_outlier(b, s, packet.encoding);
    default: break;
  }
  throw DecodeError(3, "unknown encoding id");
}

SampleBatch decode(std::span<const EncodedPacket> packets) {
  if (packets.empty()) throw DecodeError(0, "no frames to decode");
  const Encoding enc = packets.front().encoding;
  for (const auto& p : packets)
    if (p.encoding != enc) throw DecodeError(3, "mixed encodings in one unit");
  if (!is_baseline(enc)) {
    if (packets.size() > 2) throw DecodeError(0, "more than two frames in a compressed unit");
    if (packets.size() == 2 &&
        (packets[0].type != PacketType::first || packets[1].type != PacketType::second ||
         packets[0].seq != packets[1].seq))
      throw DecodeError(2, "frames are not a split pair");
    if (packets.size() == 1 && packets[0].type != PacketType::single) {
      // Lone half: partial recovery of its own samples.
    }
  }
  SampleBatch out = decode_packet(packets.front());
  for (std::size_t i = 1; i < packets.size(); ++i) {
    auto part = decode_packet(packets[i]);
    if (part.timestamps.front() <= out.timestamps.back())
      throw DecodeError(0, "frame " + std::to_string(i) + " overlaps its predecessor in time");
    out.append(part);
  }
  return out;
}

}  // namespace wsense::codec
