#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "wsense/netsim.hpp"
#include "wsense/timesync.hpp"

using namespace wsense;
using namespace wsense::netsim;

namespace {

SimConfig short_run(double seconds = 0.2) {
  SimConfig c;
  c.t_sample_s = seconds;
  c.t_alert_s = 0.5;
  c.t_p = 10;
  return c;
}

std::uint64_t event_time(const SimMetrics& m, int node, const std::string& kind) {
  for (const auto& e : m.events)
    if (e.node == node && e.kind == kind) return e.t_ns;
  FAIL("event not found: " << kind);
  return 0;
}

}  // namespace

TEST_CASE("timing presets") {
  auto t = timing_preset("stack-c-raw");
  CHECK(t.t_prep_ns == 500);
  CHECK(t.t_proc_ns == 1960);
  CHECK(t.blocking);
  CHECK(t.jitter_max_ns == 0);
  CHECK(timing_preset("stack-b-raw").t_proc_ns == 10220);
  CHECK(timing_preset("stack-a").t_prep_ns == 2500);
  CHECK(timing_preset("stack-a").t_proc_ns == 78000);
  CHECK(timing_preset("stack-a", false).jitter_max_ns == 42050);
  CHECK(timing_preset("stack-c-raw", false).jitter_max_ns == 25390);
  CHECK(timing_presets().size() == 6);
  try {
    timing_preset("lwip");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "timing.preset");
  }
}

TEST_CASE("encode durations") {
  CHECK(default_encode_time_ns(Encoding::DOENC, 256) == 60000);
  CHECK(default_encode_time_ns(Encoding::DOENC, 512) == 150000);
  CHECK(default_encode_time_ns(Encoding::OENC, 512) == 300000);
  CHECK(default_encode_time_ns(Encoding::IENC, 256) == 490000);
  CHECK(default_encode_time_ns(Encoding::IENC, 512) == 2360000);
  CHECK(default_encode_time_ns(Encoding::DOENC, 384) == 105000);
  CHECK(default_encode_time_ns(Encoding::DOENC, 1024) == 300000);
  auto t = timing_preset("zero");
  CHECK(encode_time_ns(t, Encoding::IENC, 512) == 0);
}

TEST_CASE("beacon alignment") {
  CHECK(beacon_alignment(0, 4, 5) == 8);
  CHECK(beacon_alignment(0, 4, 8) == 8);
  CHECK(beacon_alignment(3, 4, 11) == 11);
  CHECK(beacon_alignment(3, 4, 12) == 15);
  CHECK(beacon_alignment(7, 4, 2) == 7);
  CHECK(beacon_alignment(0, 1, 9) == 9);
  CHECK_THROWS_AS(beacon_alignment(0, 0, 1), ConfigError);
}

TEST_CASE("jitter injection") {
  std::mt19937_64 rng(1);
  std::vector<std::uint32_t> iv(100, 2000);
  auto blocking = timing_preset("stack-a", true);
  CHECK(jitter_injection(iv, 3, blocking, rng) == 0);
  CHECK(std::all_of(iv.begin(), iv.end(), [](auto v) { return v == 2000; }));

  auto nb = timing_preset("stack-a", false);
  nb.jitter_intervals_per_send = 2;
  std::uint32_t max_seen = 0;
  for (int round = 0; round < 2000; ++round) {
    std::fill(iv.begin(), iv.end(), 2000);
    REQUIRE(jitter_injection(iv, 3, nb, rng) == 6);
    for (std::size_t i = 6; i < iv.size(); ++i) REQUIRE(iv[i] == 2000);
    for (std::size_t i = 0; i < 6; ++i) max_seen = std::max(max_seen, iv[i]);
  }
  CHECK(max_seen <= 2000 + 42050);
  CHECK(max_seen > 2000 + 40000);
}

TEST_CASE("idle-to-alert delay formula") {
  SimConfig c;
  c.t_p = 60;
  CHECK(transition_delay_i2a(c) == doctest::Approx(58));
  c.coordinated_association = true;
  c.nodes = 100;
  c.t_p = 200;
  CHECK(transition_delay_i2a(c) == doctest::Approx(198));
  c.nodes = 1;
  CHECK(transition_delay_i2a(c) == 0);
}

TEST_CASE("measured transitions match the closed forms") {
  auto c = short_run(0.01);
  c.nodes = 10;
  c.t_p = 60;
  auto m = run(c);
  CHECK(m.i2a_measured_s == doctest::Approx(58).epsilon(1e-12));
  CHECK(m.i2a_analytic_s == doctest::Approx(58));
  const auto first = event_time(m, 0, "alert_enter");
  const auto last = event_time(m, 9, "alert_enter");
  CHECK(last - first == 58'000'000'000ull);

  c.coordinated_association = true;
  c.t_p = 40;
  m = run(c);
  CHECK(m.i2a_measured_s == doctest::Approx(18).epsilon(1e-12));

  c.coordinated_association = false;
  c.l = 10;
  c.nodes = 25;
  c.t_p = 61.3;
  for (bool aligned : {true, false}) {
    c.beacon_alignment = aligned;
    m = run(c);
    std::uint64_t lo = UINT64_MAX, hi = 0;
    for (int i = 0; i < c.nodes; ++i) {
      const auto t = event_time(m, i, "sampling_enter");
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    const double spread = static_cast<double>(hi - lo) * 1e-9;
    CHECK(spread == doctest::Approx(m.a2s_measured_s));
    if (aligned)
      CHECK(spread <= 0.1024 + 1e-12);
    else
      CHECK(spread <= 9 * 0.1024 + 1e-12);
  }
  c.beacon_alignment = false;
  CHECK(run(c).a2s_measured_s > 0.1024);
}

TEST_CASE("runs are deterministic in the seed") {
  auto c = short_run();
  c.nodes = 2;
  c.loss_probability = 0.05;
  c.record_packets = true;
  const auto a = run(c);
  const auto b = run(c);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    REQUIRE(a.events[i].t_ns == b.events[i].t_ns);
    REQUIRE(a.events[i].kind == b.events[i].kind);
    REQUIRE(a.events[i].detail == b.events[i].detail);
  }
  CHECK(a.packets == b.packets);
  CHECK(*a.effective_rate_sps == *b.effective_rate_sps);

  c.seed = 99;
  CHECK_FALSE(run(c).packets == a.packets);
}

TEST_CASE("zero pipeline durations deliver the nominal rate") {
  auto c = short_run(0.5);
  c.timing = timing_preset("zero");
  const auto m = run(c);
  REQUIRE(m.effective_rate_sps.has_value());
  CHECK(std::abs(*m.effective_rate_sps - 500000) / 500000 < 1e-3);

  c.timing = timing_preset("stack-c-raw");
  CHECK(*run(c).effective_rate_sps < 500000);
}

TEST_CASE("blocking D-OENC at 500 ksps delivers about 436 ksps") {
  const auto m = run(short_run(0.5));
  REQUIRE(m.effective_rate_sps.has_value());
  CHECK(std::abs(*m.effective_rate_sps - 436000) / 436000 < 0.02);
}

TEST_CASE("B6 data rate is roughly 3.2 times the D-OENC data rate") {
  auto c = short_run(0.5);
  const double doenc = *run(c).data_rate_bps;
  c.encoding = Encoding::B6;
  const double b6 = *run(c).data_rate_bps;
  MESSAGE("B6 / D-OENC data rate: " << b6 / doenc);
  CHECK(std::abs(b6 / doenc - 3.2) / 3.2 < 0.15);
}

TEST_CASE("conservation of samples and packets") {
  auto c = short_run(0.3);
  c.nodes = 2;
  c.loss_probability = 0.2;
  c.timing = timing_preset("stack-a", false);
  c.timing.t_proc_ns = 3'000'000;  // slower than the sampling, so the buffer fills
  c.encoding = Encoding::B8;
  const auto m = run(c);
  std::uint64_t dropped = 0;
  for (const auto& n : m.nodes) {
    CHECK(n.samples_generated == n.samples_encoded + n.samples_dropped);
    CHECK(n.packets_sent == n.packets_received + n.packets_lost);
    CHECK(n.packets_lost > 0);
    dropped += n.samples_dropped;
  }
  CHECK(dropped > 0);
}

TEST_CASE("non-blocking jitter touches few intervals and enlarges packets") {
  auto c = short_run(0.5);
  c.timing = timing_preset("stack-c", false);
  c.record_traces = true;
  const auto jit = run(c);
  const auto& n = jit.nodes[0];
  CHECK(n.jittered_intervals > 0);
  CHECK(static_cast<double>(n.jittered_intervals) / static_cast<double>(n.intervals) <= 0.01);

  const auto& trace = jit.traces.at(0);
  std::uint64_t max_iv = 0;
  for (std::size_t i = 1; i < trace.size(); ++i)
    max_iv = std::max(max_iv, trace.timestamps[i] - trace.timestamps[i - 1]);
  // Batches are separated by the pipeline gap; check only in-batch intervals.
  std::uint64_t in_batch_max = 0;
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (i % c.batch != 0) in_batch_max = std::max(in_batch_max, trace.timestamps[i] - trace.timestamps[i - 1]);
  CHECK(in_batch_max <= 2000 + 16 + 42050);

  c.timing = timing_preset("stack-c", true);
  const auto blk = run(c);
  CHECK(jit.nodes[0].mean_packet_bytes > blk.nodes[0].mean_packet_bytes);
  CHECK(blk.nodes[0].jittered_intervals == 0);
}

TEST_CASE("pairwise sync error stays within one sample interval") {
  auto c = short_run(0.05);
  c.nodes = 4;
  c.rate_sps = 100000;
  const auto m = run(c);
  CHECK(m.sync_period_s == doctest::Approx(1.95));
  CHECK(m.max_pairwise_sync_error_ns <= 10000);
}

TEST_CASE("server-side rates from received packets") {
  auto c = short_run(0.3);
  c.record_packets = true;
  const auto m = run(c);
  const auto r = stream_rates(m.packets);
  REQUIRE(r.samples_per_s.has_value());
  CHECK(*r.samples_per_s == doctest::Approx(*m.effective_rate_sps).epsilon(1e-12));
  CHECK(*r.bytes_per_s * 8 == doctest::Approx(*m.data_rate_bps).epsilon(1e-12));
  CHECK_FALSE(stream_rates(std::span(m.packets).first(1)).samples_per_s.has_value());
}

TEST_CASE("simulation config loading") {
  auto kv = KvConfig::parse(
      "[network]\nnodes = 3\nseed = 7\n"
      "[sampling]\nrate_sps = 100000\nencoding = oenc\nbatch = 256\n"
      "[timing]\npreset = stack-b\nblocking = false\njitter_max_us = 10\n"
      "[phases]\nt_sample_s = 0.1\n"
      "[coordination]\nt_p = 30\nl = 4\nserialized_association = true\n"
      "[energy]\nE_bat = 5000\n");
  const auto c = load_sim_config(kv);
  CHECK(c.nodes == 3);
  CHECK(c.seed == 7);
  CHECK(c.encoding == Encoding::OENC);
  CHECK(c.batch == 256);
  CHECK(c.timing.t_proc_ns == 28000);
  CHECK_FALSE(c.timing.blocking);
  CHECK(c.timing.jitter_max_ns == 10000);
  CHECK(c.l == 4);
  CHECK(c.coordinated_association);
  CHECK(c.profile.E_bat == 5000);
  CHECK(c.profile.N == 3);

  auto key_of = [](const std::string& text) {
    try {
      load_sim_config(KvConfig::parse(text));
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  CHECK(key_of("[network]\nnodez = 3\n") == "network.nodez");
  CHECK(key_of("[sampling]\nencoding = zip\n") == "sampling.encoding");
  CHECK(key_of("[sampling]\nbatch = 1\n") == "sampling.batch");
  CHECK(key_of("[sampling]\nrate_sps = 123\n") == "sampling.rate_sps");
  CHECK(key_of("[coordination]\nl = 11\n") == "coordination.l");
  CHECK(key_of("[timing]\npreset = fast\n") == "timing.preset");
  CHECK(key_of("[energy]\nD_bcn = 1\n") == "energy.D_bcn");
  CHECK(key_of("[sync]\nlayer = gps\n") == "sync.layer");
  CHECK(key_of("[network]\nnodes = many\n") == "network.nodes");
  CHECK(key_of("") == "<none>");
}

TEST_CASE("event log CSV") {
  auto c = short_run(0.01);
  const auto m = run(c);
  const auto path = std::filesystem::temp_directory_path() / "wsense_events.csv";
  write_events_csv(path.string(), m.events);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t_ns,node,kind,detail");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == m.events.size());
  std::filesystem::remove(path);
}
