#pragma once

// Deterministic simulation of N sensor nodes, one AP and the server: the
// Idle -> Alert -> Sampling lifecycle, transition coordination, beacon
// alignment, the per-batch sample/encode/send pipeline, channel loss and the
// metrics the server would observe.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsense/capture.hpp"
#include "wsense/codec.hpp"
#include "wsense/energy.hpp"
#include "wsense/kvconfig.hpp"

namespace wsense::netsim {

using codec::Encoding;

inline constexpr std::uint64_t kBeaconIntervalNs = 102'400'000;
inline constexpr std::size_t kDriverBufferPackets = 200;

enum class Phase { Idle, Alert, Sampling, Off };

struct PipelineTiming {
  std::string name;
  std::uint64_t t_prep_ns = 0;
  std::uint64_t t_proc_ns = 0;
  bool blocking = true;
  std::uint64_t jitter_max_ns = 0;  // non-blocking only
  unsigned jitter_intervals_per_send = 1;
  std::optional<std::uint64_t> t_encode_ns;  // overrides the per-method default
};

/// Encode duration measured for each method at s = 256 and 512, interpolated
/// linearly in s elsewhere.
std::uint64_t default_encode_time_ns(Encoding method, std::size_t s);
std::uint64_t encode_time_ns(const PipelineTiming& timing, Encoding method, std::size_t s);

std::vector<std::string> timing_presets();
/// stack-a, stack-b, stack-c, stack-b-raw, stack-c-raw. Throws ConfigError.
PipelineTiming timing_preset(std::string_view name, bool blocking = true);

/// Adds uniform [0, jitter_max_ns] delay to the intervals that follow `sends`
/// send events at the head of `intervals`. Returns how many were touched.
std::size_t jitter_injection(std::span<std::uint32_t> intervals, std::size_t sends, const PipelineTiming& timing,
                             std::mt19937_64& rng);

/// First beacon b_init + k*l (k >= 0) at or after b_received.
std::uint64_t beacon_alignment(std::uint64_t b_init, unsigned l, std::uint64_t b_received);

struct SimConfig {
  int nodes = 1;
  double rate_sps = 500000;
  std::string interval_preset;  // empty: chosen from rate_sps
  std::string waveform = "sine:50:1000";
  Encoding encoding = Encoding::DOENC;
  std::size_t batch = 512;

  PipelineTiming timing = timing_preset("stack-c-raw");

  double t_idle_s = 0;    // alert command issued at this time
  double t_alert_s = 1;   // after the last node entered Alert
  double t_sample_s = 1;  // Sampling Phase length per node
  double t_p = 60;
  int l = 1;
  bool coordinated_association = false;
  bool beacon_alignment = true;

  double loss_probability = 0;
  std::size_t link_overhead_bytes = 0;  // per packet, added to the data rate only

  std::string sync_layer = "firmware";
  double sync_period_s = 0;  // 0: max_sync_period at rate_sps
  double clock_f = 160e6;
  double clock_nu = 2.5e-6;

  energy::EnergyProfile profile = energy::default_profile();
  std::uint64_t seed = 1;

  bool record_events = true;
  bool record_packets = false;
  bool record_traces = false;
};

/// Reads [network], [sampling], [timing], [phases], [coordination], [channel],
/// [sync] and [energy] sections; unknown keys are errors.
SimConfig load_sim_config(const KvConfig& cfg);
void validate(const SimConfig& cfg);

struct Event {
  std::uint64_t t_ns;
  int node;  // -1 for AP/server events
  std::string kind;
  std::string detail;
};

struct NodeMetrics {
  std::uint64_t samples_generated = 0;
  std::uint64_t samples_encoded = 0;
  std::uint64_t samples_dropped = 0;  // batch refused by a full driver buffer
  std::uint64_t samples_received = 0;
  std::uint64_t batches = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_lost = 0;
  std::uint64_t packets_received = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t jittered_intervals = 0;
  std::uint64_t intervals = 0;
  std::uint64_t alert_enter_ns = 0;
  std::uint64_t sampling_enter_ns = 0;
  std::uint64_t sampling_exit_ns = 0;
  std::optional<double> effective_rate_sps;
  std::optional<double> data_rate_bps;
  double mean_packet_bytes = 0;
};

struct SimMetrics {
  std::vector<NodeMetrics> nodes;
  double nominal_rate_sps = 0;
  std::optional<double> effective_rate_sps;  // mean over nodes
  std::optional<double> data_rate_bps;       // mean over nodes
  double i2a_measured_s = 0;
  double i2a_analytic_s = 0;
  double a2s_measured_s = 0;
  double a2s_bound_s = 0;
  double sync_period_s = 0;
  double sync_bound_ns = 0;
  double max_pairwise_sync_error_ns = 0;
  energy::BudgetBreakdown energy;
  std::vector<Event> events;
  std::vector<CapturedPacket> packets;      // received packets, arrival order
  std::vector<codec::SampleBatch> traces;   // per node, everything sampled
};

SimMetrics run(const SimConfig& cfg);

/// Closed-form Idle-to-Alert delay: t_p - D_asc, or (N-1) * D_asc coordinated.
double transition_delay_i2a(const SimConfig& cfg);

/// Effective rate and data rate as the server measures them: everything after
/// the first packet divided by the first-to-last arrival span.
struct StreamRates {
  std::optional<double> samples_per_s;
  std::optional<double> bytes_per_s;
};
StreamRates stream_rates(std::span<const CapturedPacket> packets, std::size_t link_overhead_bytes = 0,
                         std::optional<codec::Encoding> headerless = std::nullopt);

void write_events_csv(const std::string& path, const std::vector<Event>& events);

}  // namespace wsense::netsim
