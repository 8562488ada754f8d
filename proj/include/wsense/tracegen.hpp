#pragma once

// Synthetic ADC traces with realistic inter-sample interval jitter.

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wsense/codec.hpp"

namespace wsense::tracegen {

using codec::SampleBatch;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MajorClass {
  std::int64_t offset_ns;
  double probability;
};

struct IntervalModel {
  std::string name;
  std::uint64_t base_interval_ns = 10000;
  std::vector<MajorClass> majors;
  double outlier_probability = 0.0;
  std::uint64_t outlier_spread_ns = 0;
  std::uint64_t quantum_ns = 25;
  std::uint64_t seed = 1;

  double nominal_rate_sps() const { return 1e9 / static_cast<double>(base_interval_ns); }
  /// Quantized offsets in [-spread, +spread] that are not major offsets.
  std::vector<std::int64_t> outlier_offsets() const;
};

/// Throws ConfigError naming the first violated constraint.
void validate(const IntervalModel& model);

std::vector<std::string> preset_names();
/// "100ksps-25C" and "500ksps-25C". Throws ConfigError for unknown names.
IntervalModel preset(std::string_view name);
/// Preset whose base interval matches `rate_sps` (100000 or 500000).
IntervalModel preset_for_rate(double rate_sps);

struct Waveform {
  enum class Kind { constant, sine, noise };
  Kind kind = Kind::constant;
  double freq_hz = 0.0;
  double amplitude = 0.0;
  double level = 32768.0;
};

/// "constant", "constant:<level>", "sine:<hz>:<amp>", "noise:<amp>".
Waveform parse_waveform(std::string_view text);

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
/// unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class TraceGenerator {
 public:
  TraceGenerator(IntervalModel model, Waveform waveform, std::uint64_t start_ns = 0);

  std::uint32_t next_interval();
  /// Next `n` samples of the stream; consecutive calls continue the timeline.
  SampleBatch next(std::size_t n);
  /// Moves the timeline so the next sample is taken at `t_ns`.
  void set_next_time(std::uint64_t t_ns) { next_time_ = t_ns; }

  const IntervalModel& model() const { return model_; }

 private:
  std::uint16_t sample_at(std::uint64_t t_ns);

  IntervalModel model_;
  Waveform waveform_;
  std::mt19937_64 rng_;
  std::vector<double> cumulative_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int64_t> outliers_;
  std::uint64_t next_time_;
};

SampleBatch generate(const IntervalModel& model, std::size_t n_samples, const Waveform& waveform = {},
                     std::uint64_t start_ns = 0);

struct ClassShare {
  std::uint32_t interval_ns;
  std::uint64_t count;
  double share;
};

struct IntervalStats {
  std::uint64_t intervals = 0;
  std::size_t class_count = 0;
  std::vector<ClassShare> top;  // up to 7, descending count, ties by first occurrence
  /// Mass of all classes whose individual share is below `rare_share`.
  double outlier_share = 0.0;
  double top_share(std::size_t k) const;
};

inline constexpr double kRareShare = 0.002;

/// Streaming interval counter; feed consecutive chunks of one trace.
class IntervalCounter {
 public:
  void add(const SampleBatch& chunk);
  IntervalStats stats(double rare_share = kRareShare) const;
  /// Count for each interval value, first-occurrence order.
  std::vector<ClassShare> classes() const;

 private:
  std::vector<std::uint32_t> classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::pair<std::uint32_t, std::size_t>> index_;  // sorted by interval
  bool have_last_ = false;
  std::uint64_t last_ = 0;
  std::uint64_t total_ = 0;
};

IntervalStats interval_stats(const SampleBatch& trace, double rare_share = kRareShare);

// Raw trace file: repeated [timestamp(8) | sample(2)], little-endian.
void write_raw(const std::filesystem::path& path, const SampleBatch& trace);
SampleBatch read_raw(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const SampleBatch& trace);

}  // namespace wsense::tracegen
