#pragma once

// Oscillator drift, sync-period planning and the per-node clock model.

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wsense::timesync {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// d_f = f * nu, in Hz.
double peak_freq_deviation(double f, double nu);

/// Worst-case divergence between two free-running nodes, seconds per second.
/// Equals 2 * d_f / f.
double drift_per_second(double f, double nu);

/// Longest sync period (s) keeping pairwise error within `budget_ns`, starting
/// from `initial_error_ns` right after a sync. The budget defaults to one
/// sample interval at `rate_sps`.
double max_sync_period(double rate_sps, double initial_error_ns, double f, double nu,
                       std::optional<double> budget_ns = std::nullopt);

/// Residual pairwise error right after a sync, per stack layer that stamps the
/// sync packet: "firmware" (250 ns), "driver" (30 us), "dual-stack" (120 us).
double sync_error_bound_ns(std::string_view layer);
std::vector<std::string> sync_layers();

/// Sync packet on the broadcast channel: time(8) | type(1).
inline constexpr std::size_t kSyncPayloadBytes = 9;

struct ClockModel {
  double f = 160e6;
  double nu = 2.5e-6;
  double skew = 0.0;  // fractional, |skew| <= nu
  double sync_error_bound_ns = 250.0;
  std::uint64_t anchor_true_ns = 0;
  double anchor_offset_ns = 0.0;  // local - true at the anchor

  double offset_ns(std::uint64_t true_ns) const {
    const double dt = static_cast<double>(static_cast<std::int64_t>(true_ns - anchor_true_ns));
    return anchor_offset_ns + dt * skew;
  }
  double local_ns(std::uint64_t true_ns) const { return static_cast<double>(true_ns) + offset_ns(true_ns); }
};

/// Node clock with skew drawn uniformly from [-nu, +nu].
ClockModel make_clock(double f, double nu, double bound_ns, std::mt19937_64& rng);

/// Resets the node's offset so that its time equals server time plus a
/// residual drawn uniformly from [-bound/2, +bound/2]; any two nodes synced by
/// the same packet then disagree by at most `bound`.
ClockModel apply_sync(const ClockModel& clock, std::uint64_t server_time_ns, std::mt19937_64& rng);

struct DivergenceRow {
  double t_s;
  double divergence_ns;
};

/// Worst-case pairwise error over one period: initial + t * drift.
std::vector<DivergenceRow> divergence_table(double initial_error_ns, double f, double nu, double period_s,
                                            std::size_t rows = 11);

struct PairwiseConfig {
  int nodes = 8;
  double f = 160e6;
  double nu = 2.5e-6;
  double bound_ns = 250.0;
  double period_s = 0.15;
  double duration_s = 1e6;
  std::uint64_t seed = 1;
  /// Pin two nodes at skew +nu and -nu so the worst case is always exercised.
  bool extremal_pair = true;
};

struct PairwiseResult {
  double max_pairwise_ns = 0;
  std::uint64_t syncs = 0;
  double simulated_s = 0;
};

/// Event-driven run of periodic syncs: pairwise error is piecewise linear
/// between syncs, so its maximum is attained at the instants just before and
/// just after each sync, which are the only points evaluated.
PairwiseResult simulate_pairwise_error(const PairwiseConfig& cfg);

}  // namespace wsense::timesync
