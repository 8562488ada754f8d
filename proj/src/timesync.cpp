#include "wsense/timesync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wsense/tracegen.hpp"

namespace wsense::timesync {

using tracegen::uniform01;

double peak_freq_deviation(double f, double nu) {
  if (!(f > 0)) throw DomainError("frequency must be > 0");
  return f * nu;
}

double drift_per_second(double f, double nu) {
  const double df = peak_freq_deviation(f, nu);
  if (!(f > df)) throw DomainError("frequency deviation must be smaller than the frequency");
  return 2 * df / f;
}

double max_sync_period(double rate_sps, double initial_error_ns, double f, double nu,
                       std::optional<double> budget_ns) {
  if (!(rate_sps > 0)) throw DomainError("sampling rate must be > 0");
  const double budget = budget_ns.value_or(1e9 / rate_sps);
  if (initial_error_ns < 0) throw DomainError("initial error must be >= 0");
  if (initial_error_ns > budget)
    throw DomainError("initial error " + std::to_string(initial_error_ns) + " ns exceeds the " +
                      std::to_string(budget) + " ns budget");
  const double drift = drift_per_second(f, nu);
  if (drift == 0) return std::numeric_limits<double>::infinity();
  return (budget - initial_error_ns) * 1e-9 / drift;
}

double sync_error_bound_ns(std::string_view layer) {
  if (layer == "firmware") return 250.0;
  if (layer == "driver") return 30000.0;
  if (layer == "dual-stack") return 120000.0;
  throw DomainError("unknown sync layer '" + std::string(layer) + "'");
}

std::vector<std::string> sync_layers() { return {"firmware", "driver", "dual-stack"}; }

ClockModel make_clock(double f, double nu, double bound_ns, std::mt19937_64& rng) {
  ClockModel c;
  c.f = f;
  c.nu = nu;
  c.sync_error_bound_ns = bound_ns;
  c.skew = (2 * uniform01(rng) - 1) * nu;
  return c;
}

ClockModel apply_sync(const ClockModel& clock, std::uint64_t server_time_ns, std::mt19937_64& rng) {
  ClockModel out = clock;
  out.anchor_true_ns = server_time_ns;
  out.anchor_offset_ns = (uniform01(rng) - 0.5) * clock.sync_error_bound_ns;
  return out;
}

std::vector<DivergenceRow> divergence_table(double initial_error_ns, double f, double nu, double period_s,
                                            std::size_t rows) {
  const double drift = drift_per_second(f, nu);
  std::vector<DivergenceRow> out;
  for (std::size_t i = 0; i < rows; ++i) {
    const double t = rows > 1 ? period_s * static_cast<double>(i) / static_cast<double>(rows - 1) : 0.0;
    out.push_back({t, initial_error_ns + t * drift * 1e9});
  }
  return out;
}

PairwiseResult simulate_pairwise_error(const PairwiseConfig& cfg) {
  if (cfg.nodes < 2) throw DomainError("need at least two nodes");
  if (!(cfg.period_s > 0)) throw DomainError("sync period must be > 0");
  std::mt19937_64 rng(cfg.seed);
  std::vector<ClockModel> clocks;
  for (int i = 0; i < cfg.nodes; ++i) clocks.push_back(make_clock(cfg.f, cfg.nu, cfg.bound_ns, rng));
  if (cfg.extremal_pair) {
    clocks[0].skew = cfg.nu;
    clocks[1].skew = -cfg.nu;
  }
  const auto period_ns = static_cast<std::uint64_t>(std::llround(cfg.period_s * 1e9));
  const auto end_ns = static_cast<std::uint64_t>(std::llround(cfg.duration_s * 1e9));

  PairwiseResult r;
  auto spread = [&](std::uint64_t t) {
    double lo = clocks[0].offset_ns(t), hi = lo;
    for (const auto& c : clocks) {
      const double o = c.offset_ns(t);
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
    return hi - lo;
  };
  std::uint64_t t = 0;
  for (auto& c : clocks) c = apply_sync(c, t, rng);
  ++r.syncs;
  while (t < end_ns) {
    r.max_pairwise_ns = std::max(r.max_pairwise_ns, spread(t));
    const std::uint64_t next = std::min(t + period_ns, end_ns);
    r.max_pairwise_ns = std::max(r.max_pairwise_ns, spread(next));
    t = next;
    if (t < end_ns) {
      for (auto& c : clocks) c = apply_sync(c, t, rng);
      ++r.syncs;
    }
  }
  r.simulated_s = static_cast<double>(t) * 1e-9;
  return r;
}

}  // namespace wsense::timesync
