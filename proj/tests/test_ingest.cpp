#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "oracles.hpp"
#include "wsense/capture.hpp"
#include "wsense/ingest.hpp"
#include "wsense/netsim.hpp"
#include "wsense/tracegen.hpp"

using namespace wsense;
using namespace wsense::ingest;
using codec::EncodedPacket;

namespace {

std::vector<EncodedPacket> encode_stream(const SampleBatch& trace, Encoding m, std::size_t s, std::uint16_t seq = 0) {
  std::vector<EncodedPacket> out;
  for (std::size_t first = 0; first + s <= trace.size(); first += s) {
    auto p = codec::encode(trace.slice(first, s), m, seq);
    seq = static_cast<std::uint16_t>(seq + codec::seq_advance(p));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

SampleBatch trace_of(std::size_t n, std::uint64_t seed = 1) {
  auto m = tracegen::preset("500ksps-25C");
  m.seed = seed;
  return tracegen::generate(m, n, tracegen::parse_waveform("noise:300"));
}

struct Collector {
  SampleBatch all;
  std::size_t batches = 0;
  void take(std::vector<SampleBatch> v) {
    for (auto& b : v) {
      all.append(b);
      ++batches;
    }
  }
};

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wsense_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("in-order single packets") {
  const auto trace = trace_of(512 * 20);
  const auto packets = encode_stream(trace, Encoding::DOENC, 512);
  REQUIRE(packets.size() == 20);
  StreamAssembler a;
  Collector c;
  std::uint64_t t = 0;
  for (const auto& p : packets) c.take(a.ingest(p.bytes, t += 1000));
  c.take(a.flush());
  CHECK(c.all == trace);
  CHECK(a.counters().samples == 20 * 512);
  CHECK(a.counters().losses == 0);
  CHECK(a.counters().units == 20);
  CHECK(a.counters().by_encoding[4].packets == 20);
}

TEST_CASE("sequence gaps count losses across the wrap") {
  const auto trace = trace_of(64 * 10);
  auto packets = encode_stream(trace, Encoding::OENC, 64, 5);
  StreamAssembler a;
  a.ingest(packets[0].bytes, 1);  // seq 5
  a.ingest(packets[1].bytes, 2);  // seq 6
  a.ingest(packets[3].bytes, 3);  // seq 8
  CHECK(a.counters().losses == 1);

  packets = encode_stream(trace, Encoding::OENC, 64, 65534);
  StreamAssembler w;
  for (std::size_t i : {0u, 1u, 2u, 3u}) w.ingest(packets[i].bytes, i + 1);  // 65534, 65535, 0, 1
  CHECK(w.counters().losses == 0);
  StreamAssembler g;
  g.ingest(packets[1].bytes, 1);  // 65535
  g.ingest(packets[4].bytes, 2);  // 2
  CHECK(g.counters().losses == 2);
}

TEST_CASE("duplicates and late packets are dropped and counted") {
  const auto trace = trace_of(64 * 6);
  const auto packets = encode_stream(trace, Encoding::B6, 64);
  StreamAssembler a;
  Collector c;
  c.take(a.ingest(packets[0].bytes, 1));
  c.take(a.ingest(packets[0].bytes, 2));
  c.take(a.ingest(packets[2].bytes, 3));
  c.take(a.ingest(packets[1].bytes, 4));
  c.take(a.ingest(packets[3].bytes, 5));
  CHECK(a.counters().duplicates == 1);
  CHECK(a.counters().late == 1);
  CHECK(a.counters().losses == 1);
  CHECK(c.batches == 3);
  CHECK(c.all.size() == 3 * 64);
}

TEST_CASE("split pairs reassemble in either order") {
  std::mt19937_64 rng(3);
  const auto b1 = gen::random_batch(rng, 512, gen::Pattern::all_unique);
  auto b2 = gen::random_batch(rng, 512, gen::Pattern::all_unique);
  const auto shift = b1.timestamps.back() + 1000 - b2.timestamps.front();
  for (auto& t : b2.timestamps) t += shift;
  const auto p1 = codec::encode(b1, Encoding::IENC, 10);
  const auto p2 = codec::encode(b2, Encoding::IENC, 11);
  REQUIRE(p1.size() == 2);
  REQUIRE(p2.size() == 2);

  StreamAssembler a;
  Collector c;
  c.take(a.ingest(p1[1].bytes, 1));
  CHECK(c.batches == 0);
  c.take(a.ingest(p1[0].bytes, 2));
  CHECK(c.batches == 1);
  c.take(a.ingest(p2[0].bytes, 3));
  c.take(a.ingest(p2[1].bytes, 4));
  c.take(a.flush());
  auto both = b1;
  both.append(b2);
  CHECK(c.all == both);
  CHECK(a.counters().split_pairs == 2);
  CHECK(a.counters().split_partial == 0);
  CHECK(a.counters().units == 2);
}

TEST_CASE("a lone half is emitted when a newer sequence number arrives") {
  std::mt19937_64 rng(4);
  const auto b1 = gen::random_batch(rng, 512, gen::Pattern::all_unique);
  auto b2 = gen::random_batch(rng, 512, gen::Pattern::all_unique);
  const auto shift = b1.timestamps.back() + 1000 - b2.timestamps.front();
  for (auto& t : b2.timestamps) t += shift;
  const auto p1 = codec::encode(b1, Encoding::OENC, 0);
  const auto p2 = codec::encode(b2, Encoding::OENC, 1);

  StreamAssembler a;
  Collector c;
  c.take(a.ingest(p1[1].bytes, 1));
  c.take(a.ingest(p2[0].bytes, 2));
  CHECK(c.batches == 1);
  CHECK(c.all == b1.slice(256, 256));
  CHECK(a.counters().split_partial == 1);
  c.take(a.flush());
  CHECK(c.batches == 2);
  CHECK(a.counters().split_partial == 2);
}

TEST_CASE("malformed datagrams are counted and skipped") {
  const auto trace = trace_of(128 * 3);
  const auto packets = encode_stream(trace, Encoding::DOENC, 128);
  StreamAssembler a;
  Collector c;
  c.take(a.ingest(packets[0].bytes, 1));
  c.take(a.ingest(std::vector<std::uint8_t>{1, 2, 3}, 2));
  auto broken = packets[1].bytes;
  broken.resize(broken.size() - 3);
  c.take(a.ingest(broken, 3));
  c.take(a.ingest(packets[2].bytes, 4));
  CHECK(a.counters().decode_errors == 2);
  CHECK(a.counters().datagrams == 4);
  CHECK(a.counters().losses == 1);
  CHECK(c.all.size() == 256);
}

TEST_CASE("records going backwards in time are dropped") {
  const auto trace = trace_of(128);
  const auto early = codec::encode(trace.slice(0, 64), Encoding::B6, 1);
  const auto late = codec::encode(trace.slice(64, 64), Encoding::B6, 0);
  StreamAssembler a;
  a.ingest(late[0].bytes, 1);
  const auto out = a.ingest(early[0].bytes, 2);
  CHECK(out.empty());
  CHECK(a.counters().out_of_order == 1);
}

TEST_CASE("receive rates") {
  const auto trace = trace_of(100 * 4);
  const auto packets = encode_stream(trace, Encoding::B8, 100);
  StreamAssembler a(Encoding::B8);
  a.ingest(packets[0].bytes, 1'000'000'000);
  CHECK_FALSE(a.samples_per_s().has_value());
  CHECK_FALSE(a.bytes_per_s().has_value());
  a.ingest(packets[1].bytes, 1'000'100'000);
  a.ingest(packets[2].bytes, 1'000'200'000);
  REQUIRE(a.samples_per_s().has_value());
  CHECK(*a.samples_per_s() == doctest::Approx(200 / 200e-6));
  CHECK(*a.bytes_per_s() == doctest::Approx(2 * 1002 / 200e-6));
}

TEST_CASE("end-to-end reconstruction for every encoding") {
  const auto trace = trace_of(512 * 12 + 300);
  for (auto m : codec::kAllEncodings) {
    const std::size_t s = m == Encoding::IENC ? 256 : 512;
    const auto packets = encode_stream(trace, m, s);
    std::vector<CapturedPacket> cap;
    std::uint64_t t = 0;
    for (const auto& p : packets) cap.push_back({t += 5000, 3, p.bytes});
    SampleBatch got;
    const auto headerless = m == Encoding::B8 ? std::optional(Encoding::B8) : std::nullopt;
    const auto r = ingest_capture(parse_capture(serialize_capture(cap)), headerless, [&](std::uint32_t src, const std::string&, const SampleBatch& b) {
                                    CHECK(src == 3);
                                    got.append(b);
                                  });
    const std::size_t whole = trace.size() / s * s;
    CHECK(got == trace.slice(0, whole));
    CHECK(r.total.losses == 0);
    CHECK(r.total.decode_errors == 0);
  }
}

TEST_CASE("simulated loss is accounted for exactly") {
  netsim::SimConfig c;
  c.t_sample_s = 0.3;
  c.t_p = 10;
  c.nodes = 2;
  c.loss_probability = 0.1;
  c.record_packets = true;
  c.record_traces = true;
  c.encoding = Encoding::IENC;
  c.batch = 512;
  c.rate_sps = 100000;
  const auto m = netsim::run(c);

  std::map<std::uint32_t, SampleBatch> got;
  const auto r = ingest_capture(m.packets, std::nullopt,
                                [&](std::uint32_t src, const std::string&, const SampleBatch& b) { got[src].append(b); });
  for (std::uint32_t node = 0; node < 2; ++node) {
    const auto& n = m.nodes[node];
    REQUIRE(n.packets_lost > 0);
    CHECK(got[node].size() == n.samples_received);
    CHECK(r.sources[node].counters.packets == n.packets_received);

    // Every unit missing below the last received sequence number shows up as a gap.
    std::set<std::uint16_t> seen;
    std::uint16_t last_seq = 0;
    for (const auto& p : m.packets)
      if (p.source_id == node) seen.insert(last_seq = codec::parse_frame(p.bytes).seq);
    std::uint64_t missing = 0;
    for (std::uint16_t s = 0; s < last_seq; ++s)
      if (!seen.count(s)) ++missing;
    CHECK(r.sources[node].counters.losses == missing);
  }
}

TEST_CASE("fuzzed datagrams never break the assembler") {
  std::mt19937_64 rng(99);
  const auto trace = trace_of(512 * 4);
  const auto valid = encode_stream(trace, Encoding::DOENC, 512);
  StreamAssembler a;
  std::vector<std::uint8_t> buf;
  for (int i = 0; i < 1000000; ++i) {
    if (i % 4 == 0) {
      buf = valid[static_cast<std::size_t>(rng() % valid.size())].bytes;
      const int flips = 1 + static_cast<int>(rng() % 4);
      for (int f = 0; f < flips; ++f) buf[rng() % buf.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      if (rng() % 3 == 0) buf.resize(rng() % buf.size());
    } else {
      buf.resize(rng() % 80);
      for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
      if (buf.size() >= 6 && rng() % 2) {
        buf[2] = static_cast<std::uint8_t>(rng() % 3);
        buf[3] = static_cast<std::uint8_t>(1 + rng() % 4);
      }
    }
    a.ingest(buf, static_cast<std::uint64_t>(i));
  }
  a.flush();
  const auto& c = a.counters();
  CHECK(c.datagrams == 1000000);
  CHECK(c.packets + c.decode_errors == c.datagrams);

  // Still healthy: a fresh valid packet decodes.
  const auto later = codec::encode(trace_of(64, 5).slice(0, 64), Encoding::B6, 0);
  StreamAssembler b;
  CHECK(b.ingest(later[0].bytes, 1).size() == 1);
}

TEST_CASE("capture files") {
  std::vector<CapturedPacket> cap{{1, 2, {1, 2, 3}}, {5, 65535, {}}, {0xFFFFFFFFFFull, 7, std::vector<std::uint8_t>(1472, 9)}};
  const auto path = std::filesystem::temp_directory_path() / "wsense_test.cap";
  write_capture(path, cap);
  CHECK(std::filesystem::file_size(path) == 3 * 12 + 3 + 1472);
  CHECK(read_capture(path) == cap);
  auto bytes = serialize_capture(cap);
  CHECK(parse_capture(bytes) == cap);
  bytes.pop_back();
  CHECK_THROWS_AS(parse_capture(bytes), DecodeError);
  std::filesystem::remove(path);
}

TEST_CASE("record files rotate and concatenate to the stream") {
  const auto dir = temp_dir("records");
  const auto trace = trace_of(1000);
  {
    RecordWriter w(dir, RecordFormat::raw, 3000);
    for (std::size_t i = 0; i < 10; ++i) w.write(1, "10.0.0.1:5000", trace.slice(i * 100, 100));
    CHECK(w.files().size() >= 3);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    auto idx = [](const std::filesystem::path& p) {
      const auto stem = p.stem().string();
      const auto dot = stem.rfind('.');
      return dot == std::string::npos || stem.find('_') > dot ? 0 : std::stoi(stem.substr(dot + 1));
    };
    return idx(a) < idx(b);
  });
  SampleBatch all;
  for (const auto& f : files) {
    if (std::filesystem::file_size(f) == 0) continue;
    all.append(tracegen::read_raw(f));
  }
  CHECK(all == trace);

  const auto csv_dir = temp_dir("records_csv");
  {
    RecordWriter w(csv_dir, RecordFormat::csv);
    w.write(0, "", trace.slice(0, 10));
    REQUIRE(w.files().size() == 1);
    std::ifstream in(w.files()[0]);
    std::string line;
    std::getline(in, line);
    CHECK(line == "timestamp_ns,sample");
    std::getline(in, line);
    CHECK(line == std::to_string(trace.timestamps[0]) + "," + std::to_string(trace.samples[0]));
  }
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(csv_dir);
}

TEST_CASE("concurrent ingestion from several sources") {
  const auto trace = trace_of(512 * 50);
  const auto packets = encode_stream(trace, Encoding::DOENC, 512);
  std::mutex mu;
  std::map<std::uint32_t, SampleBatch> got;
  Ingestor ing(std::nullopt, [&](std::uint32_t src, const std::string&, const SampleBatch& b) {
    std::lock_guard lock(mu);
    got[src].append(b);
  });
  std::vector<std::thread> threads;
  for (std::uint32_t src = 0; src < 4; ++src)
    threads.emplace_back([&, src] {
      std::uint64_t t = 0;
      for (const auto& p : packets) ing.ingest(src, p.bytes, t += 1000);
    });
  for (auto& t : threads) t.join();
  ing.flush();
  const auto r = ing.report();
  CHECK(r.sources.size() == 4);
  CHECK(r.total.samples == 4 * trace.size());
  for (std::uint32_t src = 0; src < 4; ++src) CHECK(got[src] == trace);
  REQUIRE(r.samples_per_s.has_value());
  CHECK(*r.samples_per_s == doctest::Approx(4 * *r.sources[0].samples_per_s));
  const auto j = to_json(r);
  CHECK(j["total"]["samples"] == 4 * trace.size());
  CHECK(j["sources"].size() == 4);
}

TEST_CASE("UDP loopback delivery") {
  const auto trace = trace_of(512 * 30);
  const auto packets = encode_stream(trace, Encoding::OENC, 512);
  std::vector<CapturedPacket> cap;
  std::uint64_t t = 0;
  for (const auto& p : packets) cap.push_back({t += 100000, 0, p.bytes});

  UdpServer server("127.0.0.1:0");
  REQUIRE(server.port() != 0);
  SampleBatch got;
  Ingestor ing(std::nullopt, [&](std::uint32_t, const std::string&, const SampleBatch& b) { got.append(b); });
  std::atomic<bool> stop{false};
  std::thread rx([&] { server.serve(ing, stop, cap.size()); });
  udp_replay("127.0.0.1:" + std::to_string(server.port()), cap, true);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (ing.report().total.datagrams < cap.size() && std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  stop = true;
  rx.join();
  ing.flush();
  CHECK(got == trace);
  const auto r = ing.report();
  REQUIRE(r.sources.size() == 1);
  CHECK(r.sources[0].name.rfind("127.0.0.1:", 0) == 0);
  CHECK_THROWS_AS(UdpServer("no-port"), std::invalid_argument);
}
