#include "wsense/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>

#include "wsense/timesync.hpp"
#include "wsense/tracegen.hpp"

namespace wsense::netsim {

namespace {

std::uint64_t to_ns(double s) { return static_cast<std::uint64_t>(std::llround(s * 1e9)); }
double to_s(std::uint64_t ns) { return static_cast<double>(ns) * 1e-9; }
std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t node_seed(std::uint64_t seed, int node) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(node + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct EncodeTimes {
  Encoding method;
  double us256;
  double us512;
};

// Compressed methods: missed samples at 100 ksps while encoding. Baselines:
// fitted so that B6 runs 10% faster than D-OENC on the raw-stack preset.
constexpr EncodeTimes kEncodeTimes[] = {
    {Encoding::IENC, 490, 2360}, {Encoding::OENC, 90, 300},    {Encoding::DOENC, 60, 150},
    {Encoding::B6, 13.7, 27.4},  {Encoding::B8, 13.7, 27.4},
};

}  // namespace

std::uint64_t default_encode_time_ns(Encoding method, std::size_t s) {
  for (const auto& e : kEncodeTimes) {
    if (e.method != method) continue;
    const double n = static_cast<double>(s);
    double us = 0;
    if (s <= 256)
      us = e.us256 * n / 256;
    else if (s <= 512)
      us = e.us256 + (e.us512 - e.us256) * (n - 256) / 256;
    else
      us = e.us512 * n / 512;
    return static_cast<std::uint64_t>(std::llround(us * 1000));
  }
  return 0;
}

std::uint64_t encode_time_ns(const PipelineTiming& timing, Encoding method, std::size_t s) {
  return timing.t_encode_ns ? *timing.t_encode_ns : default_encode_time_ns(method, s);
}

std::vector<std::string> timing_presets() {
  return {"stack-a", "stack-b", "stack-c", "stack-b-raw", "stack-c-raw", "zero"};
}

PipelineTiming timing_preset(std::string_view name, bool blocking) {
  PipelineTiming t;
  t.name = std::string(name);
  t.blocking = blocking;
  if (name == "stack-a") {
    t.t_prep_ns = 2500;
    t.t_proc_ns = 78000;
    t.jitter_max_ns = 42050;
  } else if (name == "stack-b") {
    t.t_prep_ns = 500;
    t.t_proc_ns = 28000;
    t.jitter_max_ns = 42050;
  } else if (name == "stack-c") {
    t.t_prep_ns = 500;
    t.t_proc_ns = 26000;
    t.jitter_max_ns = 42050;
  } else if (name == "stack-b-raw") {
    t.t_prep_ns = 500;
    t.t_proc_ns = 10220;
    t.jitter_max_ns = 25390;
  } else if (name == "stack-c-raw") {
    t.t_prep_ns = 500;
    t.t_proc_ns = 1960;
    t.jitter_max_ns = 25390;
  } else if (name == "zero") {
    t.t_encode_ns = 0;
  } else {
    throw ConfigError("timing.preset", "unknown timing preset '" + std::string(name) + "'");
  }
  if (blocking) t.jitter_max_ns = 0;
  return t;
}

std::size_t jitter_injection(std::span<std::uint32_t> intervals, std::size_t sends, const PipelineTiming& timing,
                             std::mt19937_64& rng) {
  if (timing.blocking || timing.jitter_max_ns == 0) return 0;
  const std::size_t n = std::min(intervals.size(), sends * timing.jitter_intervals_per_send);
  for (std::size_t i = 0; i < n; ++i) {
    const auto extra = static_cast<std::uint64_t>(tracegen::uniform01(rng) * static_cast<double>(timing.jitter_max_ns + 1));
    intervals[i] = static_cast<std::uint32_t>(std::min<std::uint64_t>(intervals[i] + extra, 0xFFFFFFFFu));
  }
  return n;
}

std::uint64_t beacon_alignment(std::uint64_t b_init, unsigned l, std::uint64_t b_received) {
  if (l == 0) throw ConfigError("coordination.l", "must be >= 1");
  if (b_received <= b_init) return b_init;
  return b_init + ceil_div(b_received - b_init, l) * l;
}

// ---- configuration ---------------------------------------------------------------

SimConfig load_sim_config(const KvConfig& kv) {
  SimConfig c;
  c.nodes = static_cast<int>(kv.get_int("network.nodes", c.nodes));
  c.seed = static_cast<std::uint64_t>(kv.get_int("network.seed", static_cast<long long>(c.seed)));

  c.rate_sps = kv.get_double("sampling.rate_sps", c.rate_sps);
  c.interval_preset = kv.get_string("sampling.interval_preset", c.interval_preset);
  c.waveform = kv.get_string("sampling.waveform", c.waveform);
  const auto enc = kv.get_string("sampling.encoding", "DOENC");
  if (auto e = codec::parse_encoding(enc))
    c.encoding = *e;
  else
    throw ConfigError("sampling.encoding", "unknown encoding '" + enc + "'");
  const auto batch = kv.get_int("sampling.batch", static_cast<long long>(c.batch));
  if (batch < static_cast<long long>(codec::kMinBatch) || batch > static_cast<long long>(codec::kMaxBatch))
    throw ConfigError("sampling.batch", "must be in [2, 4096]");
  c.batch = static_cast<std::size_t>(batch);

  const bool blocking = kv.get_bool("timing.blocking", true);
  c.timing = timing_preset(kv.get_string("timing.preset", "stack-c-raw"), blocking);
  if (kv.has("timing.t_encode_us")) c.timing.t_encode_ns = to_ns(kv.get_double("timing.t_encode_us") * 1e-6);
  c.timing.t_prep_ns = to_ns(kv.get_double("timing.t_prep_us", static_cast<double>(c.timing.t_prep_ns) * 1e-3) * 1e-6);
  c.timing.t_proc_ns = to_ns(kv.get_double("timing.t_proc_us", static_cast<double>(c.timing.t_proc_ns) * 1e-3) * 1e-6);
  if (!blocking) {
    c.timing.jitter_max_ns =
        to_ns(kv.get_double("timing.jitter_max_us", static_cast<double>(c.timing.jitter_max_ns) * 1e-3) * 1e-6);
    c.timing.jitter_intervals_per_send =
        static_cast<unsigned>(kv.get_int("timing.jitter_intervals_per_send", c.timing.jitter_intervals_per_send));
  }

  c.t_idle_s = kv.get_double("phases.t_idle_s", c.t_idle_s);
  c.t_alert_s = kv.get_double("phases.t_alert_s", c.t_alert_s);
  c.t_sample_s = kv.get_double("phases.t_sample_s", c.t_sample_s);

  c.t_p = kv.get_double("coordination.t_p", c.t_p);
  c.l = static_cast<int>(kv.get_int("coordination.l", c.l));
  c.coordinated_association = kv.get_bool("coordination.serialized_association", c.coordinated_association);
  c.beacon_alignment = kv.get_bool("coordination.beacon_alignment", c.beacon_alignment);

  c.loss_probability = kv.get_double("channel.loss_probability", c.loss_probability);
  c.link_overhead_bytes = static_cast<std::size_t>(kv.get_int("channel.link_overhead_bytes", 0));

  c.sync_layer = kv.get_string("sync.layer", c.sync_layer);
  c.sync_period_s = kv.get_double("sync.period_s", c.sync_period_s);
  c.clock_f = kv.get_double("sync.freq_hz", c.clock_f);
  c.clock_nu = kv.get_double("sync.ppm", c.clock_nu * 1e6) * 1e-6;

  c.profile = energy::load_profile(kv, "energy.");
  c.profile.N = c.nodes;

  c.record_events = kv.get_bool("output.events", c.record_events);
  kv.reject_unknown();
  validate(c);
  return c;
}

void validate(const SimConfig& c) {
  if (c.nodes < 1 || c.nodes > 65535) throw ConfigError("network.nodes", "must be in [1, 65535]");
  if (!(c.rate_sps > 0)) throw ConfigError("sampling.rate_sps", "must be > 0");
  if (c.batch < codec::kMinBatch || c.batch > codec::kMaxBatch) throw ConfigError("sampling.batch", "must be in [2, 4096]");
  if (c.t_idle_s < 0) throw ConfigError("phases.t_idle_s", "must be >= 0");
  if (c.t_alert_s < 0) throw ConfigError("phases.t_alert_s", "must be >= 0");
  if (!(c.t_sample_s > 0)) throw ConfigError("phases.t_sample_s", "must be > 0");
  if (c.l < 1 || c.l > energy::kMaxListenCoefficient) throw ConfigError("coordination.l", "must be in [1, 10]");
  if (!(c.t_p > c.profile.D_asc)) throw ConfigError("coordination.t_p", "must exceed energy.D_asc");
  if (c.coordinated_association && c.t_p < c.nodes * c.profile.D_asc)
    throw ConfigError("coordination.t_p", "serialized association needs t_p >= N * D_asc");
  if (!(c.loss_probability >= 0 && c.loss_probability <= 1))
    throw ConfigError("channel.loss_probability", "must be in [0, 1]");
  if (c.sync_period_s < 0) throw ConfigError("sync.period_s", "must be >= 0");
  try {
    timesync::sync_error_bound_ns(c.sync_layer);
  } catch (const std::exception& e) {
    throw ConfigError("sync.layer", e.what());
  }
  try {
    if (c.interval_preset.empty())
      tracegen::preset_for_rate(c.rate_sps);
    else
      tracegen::preset(c.interval_preset);
  } catch (const std::exception& e) {
    throw ConfigError(c.interval_preset.empty() ? "sampling.rate_sps" : "sampling.interval_preset", e.what());
  }
  try {
    tracegen::parse_waveform(c.waveform);
  } catch (const std::exception& e) {
    throw ConfigError("sampling.waveform", e.what());
  }
  try {
    energy::validate(c.profile);
  } catch (const std::exception& e) {
    throw ConfigError("energy", e.what());
  }
}

double transition_delay_i2a(const SimConfig& c) {
  if (c.coordinated_association) return (c.nodes - 1) * c.profile.D_asc;
  return c.t_p - c.profile.D_asc;
}

// ---- metrics helpers --------------------------------------------------------------

StreamRates stream_rates(std::span<const CapturedPacket> packets, std::size_t link_overhead_bytes,
                         std::optional<codec::Encoding> headerless) {
  StreamRates r;
  if (packets.size() < 2) return r;
  const auto span_ns = packets.back().recv_time_ns - packets.front().recv_time_ns;
  if (span_ns == 0) return r;
  std::uint64_t samples = 0, bytes = 0;
  for (std::size_t i = 1; i < packets.size(); ++i) {
    samples += codec::parse_frame(packets[i].bytes, headerless).sample_count();
    bytes += packets[i].bytes.size() + link_overhead_bytes;
  }
  r.samples_per_s = static_cast<double>(samples) / to_s(span_ns);
  r.bytes_per_s = static_cast<double>(bytes) / to_s(span_ns);
  return r;
}

void write_events_csv(const std::string& path, const std::vector<Event>& events) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "t_ns,node,kind,detail\n";
  for (const auto& e : events) f << e.t_ns << ',' << e.node << ',' << e.kind << ',' << e.detail << '\n';
}

// ---- simulation ------------------------------------------------------------------------

namespace {

struct NodeRun {
  NodeMetrics m;
  std::vector<Event> events;
  std::vector<CapturedPacket> packets;
  codec::SampleBatch trace;
};

struct Arrival {
  std::uint64_t first_time = 0, last_time = 0;
  std::uint64_t first_samples = 0, first_bytes = 0;
  bool any = false;

  void add(std::uint64_t t, std::uint64_t samples, std::uint64_t bytes) {
    if (!any) {
      any = true;
      first_time = t;
      first_samples = samples;
      first_bytes = bytes;
    }
    last_time = t;
  }
};

NodeRun run_sampling(const SimConfig& cfg, int node, std::uint64_t start_ns, double sync_period_s, double bound_ns) {
  NodeRun out;
  auto& m = out.m;
  std::mt19937_64 rng(node_seed(cfg.seed, node));

  auto model = cfg.interval_preset.empty() ? tracegen::preset_for_rate(cfg.rate_sps) : tracegen::preset(cfg.interval_preset);
  model.seed = node_seed(cfg.seed ^ 0x5A5A5A5Aull, node);
  tracegen::TraceGenerator gen(model, tracegen::parse_waveform(cfg.waveform));

  auto clock = timesync::make_clock(cfg.clock_f, cfg.clock_nu, bound_ns, rng);
  clock = timesync::apply_sync(clock, start_ns, rng);
  const std::uint64_t sync_period_ns = std::max<std::uint64_t>(1, to_ns(sync_period_s));
  std::uint64_t next_sync = start_ns + sync_period_ns;

  const std::uint64_t end_ns = start_ns + to_ns(cfg.t_sample_s);
  const std::uint64_t t_encode = encode_time_ns(cfg.timing, cfg.encoding, cfg.batch);
  std::deque<std::uint64_t> driver_queue;  // completion times of buffered packets
  std::uint64_t stack_free = 0;
  std::uint16_t seq = 0;
  std::size_t pending_sends = 0;
  std::uint64_t last_ts = 0;
  bool have_ts = false;
  Arrival arrival;
  std::uint64_t t = start_ns;
  std::uint64_t total_packet_bytes = 0;

  auto log = [&](std::uint64_t at, std::string kind, std::string detail) {
    if (cfg.record_events) out.events.push_back({at, node, std::move(kind), std::move(detail)});
  };
  log(start_ns, "sampling_enter", "");

  while (t < end_ns) {
    while (t >= next_sync) {
      clock = timesync::apply_sync(clock, next_sync, rng);
      log(next_sync, "sync", "");
      next_sync += sync_period_ns;
    }
    auto local = static_cast<std::uint64_t>(std::llround(std::max(0.0, clock.local_ns(t))));
    if (have_ts && local <= last_ts) local = last_ts + 1;
    gen.set_next_time(local);
    auto batch = gen.next(cfg.batch);
    if (pending_sends > 0 && !cfg.timing.blocking) {
      std::vector<std::uint32_t> iv(batch.size() - 1);
      for (std::size_t i = 1; i < batch.size(); ++i) iv[i - 1] = static_cast<std::uint32_t>(batch.timestamps[i] - batch.timestamps[i - 1]);
      m.jittered_intervals += jitter_injection(iv, pending_sends, cfg.timing, rng);
      for (std::size_t i = 1; i < batch.size(); ++i) batch.timestamps[i] = batch.timestamps[i - 1] + iv[i - 1];
    }
    const std::uint64_t duration = batch.timestamps.back() - batch.timestamps.front();
    std::uint64_t now = t + duration;
    if (now >= end_ns) break;
    m.intervals += batch.size() - 1;
    m.samples_generated += batch.size();
    ++m.batches;

    auto packets = codec::encode(batch, cfg.encoding, seq);
    seq = static_cast<std::uint16_t>(seq + codec::seq_advance(packets));
    now += t_encode;

    bool dropped = false;
    if (!cfg.timing.blocking) {
      while (!driver_queue.empty() && driver_queue.front() <= now) driver_queue.pop_front();
      if (driver_queue.size() + packets.size() > kDriverBufferPackets) dropped = true;
    }
    if (dropped) {
      m.samples_dropped += batch.size();
      log(now, "drop_batch", "seq=" + std::to_string(packets.front().seq));
      pending_sends = 0;
    } else {
      m.samples_encoded += batch.size();
      if (cfg.record_traces) out.trace.append(batch);
      for (auto& p : packets) {
        now += cfg.timing.t_prep_ns;
        std::uint64_t sent = 0;
        if (cfg.timing.blocking) {
          now += cfg.timing.t_proc_ns;
          sent = now;
        } else {
          const std::uint64_t begin = std::max(now, stack_free);
          stack_free = begin + cfg.timing.t_proc_ns;
          driver_queue.push_back(stack_free);
          sent = stack_free;
        }
        ++m.packets_sent;
        m.bytes_sent += p.bytes.size();
        total_packet_bytes += p.bytes.size();
        const bool lost = cfg.loss_probability > 0 && tracegen::uniform01(rng) < cfg.loss_probability;
        const std::string detail = std::string(codec::to_string(p.encoding)) + " seq=" + std::to_string(p.seq) +
                                   " type=" + std::to_string(static_cast<int>(p.type)) +
                                   " bytes=" + std::to_string(p.bytes.size());
        if (lost) {
          ++m.packets_lost;
          log(sent, "lost", detail);
          continue;
        }
        log(sent, "send", detail);
        const auto n = p.sample_count();
        ++m.packets_received;
        m.samples_received += n;
        m.bytes_received += p.bytes.size() + cfg.link_overhead_bytes;
        arrival.add(sent, n, p.bytes.size() + cfg.link_overhead_bytes);
        if (cfg.record_packets) out.packets.push_back({sent, static_cast<std::uint16_t>(node), std::move(p.bytes)});
      }
      pending_sends = packets.size();
    }
    have_ts = true;
    last_ts = batch.timestamps.back();
    // The ADC resumes on the next sample tick after the send completes.
    t = now + gen.next_interval();
  }
  m.sampling_enter_ns = start_ns;
  m.sampling_exit_ns = end_ns;
  log(end_ns, "sampling_exit", "");
  if (m.packets_sent > 0) m.mean_packet_bytes = static_cast<double>(total_packet_bytes) / static_cast<double>(m.packets_sent);
  if (arrival.any && arrival.last_time > arrival.first_time) {
    const double span = to_s(arrival.last_time - arrival.first_time);
    m.effective_rate_sps = static_cast<double>(m.samples_received - arrival.first_samples) / span;
    m.data_rate_bps = 8.0 * static_cast<double>(m.bytes_received - arrival.first_bytes) / span;
  }
  return out;
}

}  // namespace

SimMetrics run(const SimConfig& cfg) {
  validate(cfg);
  SimMetrics out;
  const int N = cfg.nodes;
  const std::uint64_t D = to_ns(cfg.profile.D_asc);
  const std::uint64_t TP = to_ns(cfg.t_p);
  const std::uint64_t B = kBeaconIntervalNs;
  std::vector<NodeMetrics> nodes(static_cast<std::size_t>(N));
  std::vector<Event> events;
  auto log = [&](std::uint64_t at, int node, std::string kind, std::string detail = {}) {
    if (cfg.record_events) events.push_back({at, node, std::move(kind), std::move(detail)});
  };

  // Idle: each node learns of the alert command at its next association.
  // Association slots are placed for the worst case: the first node associates
  // right as the command is issued and the last one t_p - D_asc later.
  const std::uint64_t t_cmd = to_ns(cfg.t_idle_s);
  log(t_cmd, -1, "alert_cmd");
  for (int i = 0; i < N; ++i) {
    std::uint64_t assoc = t_cmd;
    if (cfg.coordinated_association)
      assoc += static_cast<std::uint64_t>(i) * D;
    else if (N > 1)
      assoc += static_cast<std::uint64_t>(i) * (TP - D) / static_cast<std::uint64_t>(N - 1);
    nodes[static_cast<std::size_t>(i)].alert_enter_ns = assoc + D;
    log(assoc, i, "assoc");
    log(assoc + D, i, "alert_enter");
  }

  // Alert: listen-interval enforcement and the sampling command.
  std::uint64_t last_alert = 0, b0 = UINT64_MAX;
  std::vector<std::uint64_t> b_init(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    last_alert = std::max(last_alert, n.alert_enter_ns);
    b_init[static_cast<std::size_t>(i)] = ceil_div(n.alert_enter_ns, B);
    b0 = std::min(b0, b_init[static_cast<std::size_t>(i)]);
  }
  const std::uint64_t t_scmd = last_alert + to_ns(cfg.t_alert_s);
  const std::uint64_t b_cmd = ceil_div(t_scmd, B);
  const auto l = static_cast<std::uint64_t>(cfg.l);
  log(t_scmd, -1, "sample_cmd", "beacon=" + std::to_string(b_cmd));
  for (int i = 0; i < N; ++i) {
    const auto bi = b_init[static_cast<std::size_t>(i)];
    const std::uint64_t enforce = cfg.beacon_alignment ? beacon_alignment(b0, static_cast<unsigned>(l), bi) : bi;
    log(enforce * B, i, "enforce_l", "beacon=" + std::to_string(enforce));
    std::uint64_t hear = b_cmd;
    if (b_cmd > enforce) hear = enforce + ceil_div(b_cmd - enforce, l) * l;
    nodes[static_cast<std::size_t>(i)].sampling_enter_ns = hear * B;
  }

  // Sampling.
  const double bound = timesync::sync_error_bound_ns(cfg.sync_layer);
  double period = cfg.sync_period_s;
  if (period == 0) {
    try {
      period = timesync::max_sync_period(cfg.rate_sps, bound, cfg.clock_f, cfg.clock_nu);
    } catch (const std::exception& e) {
      throw ConfigError("sync.layer", std::string("no feasible sync period: ") + e.what());
    }
  }
  out.sync_period_s = period;
  out.sync_bound_ns = bound;

  for (int i = 0; i < N; ++i) {
    auto r = run_sampling(cfg, i, nodes[static_cast<std::size_t>(i)].sampling_enter_ns, period, bound);
    r.m.alert_enter_ns = nodes[static_cast<std::size_t>(i)].alert_enter_ns;
    nodes[static_cast<std::size_t>(i)] = r.m;
    events.insert(events.end(), std::make_move_iterator(r.events.begin()), std::make_move_iterator(r.events.end()));
    out.packets.insert(out.packets.end(), std::make_move_iterator(r.packets.begin()),
                       std::make_move_iterator(r.packets.end()));
    if (cfg.record_traces) out.traces.push_back(std::move(r.trace));
  }

  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.t_ns != b.t_ns ? a.t_ns < b.t_ns : a.node < b.node;
  });
  std::stable_sort(out.packets.begin(), out.packets.end(), [](const CapturedPacket& a, const CapturedPacket& b) {
    return a.recv_time_ns != b.recv_time_ns ? a.recv_time_ns < b.recv_time_ns : a.source_id < b.source_id;
  });

  auto spread = [&](auto field) {
    std::uint64_t lo = UINT64_MAX, hi = 0;
    for (const auto& n : nodes) {
      lo = std::min(lo, n.*field);
      hi = std::max(hi, n.*field);
    }
    return to_s(hi - lo);
  };
  out.i2a_measured_s = spread(&NodeMetrics::alert_enter_ns);
  out.i2a_analytic_s = transition_delay_i2a(cfg);
  out.a2s_measured_s = spread(&NodeMetrics::sampling_enter_ns);
  out.a2s_bound_s = cfg.beacon_alignment ? to_s(B) : static_cast<double>(cfg.l - 1) * to_s(B);

  if (N >= 2) {
    timesync::PairwiseConfig pc;
    pc.nodes = N;
    pc.f = cfg.clock_f;
    pc.nu = cfg.clock_nu;
    pc.bound_ns = bound;
    pc.period_s = period;
    pc.duration_s = cfg.t_sample_s;
    pc.seed = cfg.seed;
    out.max_pairwise_sync_error_ns = timesync::simulate_pairwise_error(pc).max_pairwise_ns;
  }

  out.nominal_rate_sps = cfg.rate_sps;
  double rate_sum = 0, data_sum = 0;
  int rate_n = 0;
  for (const auto& n : nodes) {
    if (!n.effective_rate_sps) continue;
    rate_sum += *n.effective_rate_sps;
    data_sum += *n.data_rate_bps;
    ++rate_n;
  }
  if (rate_n > 0) {
    out.effective_rate_sps = rate_sum / rate_n;
    out.data_rate_bps = data_sum / rate_n;
  }

  auto profile = cfg.profile;
  profile.N = N;
  out.energy = energy::budget_check(profile, cfg.t_idle_s, cfg.t_sample_s, cfg.t_p, cfg.l);
  out.nodes = std::move(nodes);
  out.events = std::move(events);
  return out;
}

}  // namespace wsense::netsim
