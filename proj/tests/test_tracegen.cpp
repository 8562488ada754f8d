#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

#include "wsense/tracegen.hpp"

using namespace wsense;
using namespace wsense::tracegen;

namespace {

std::vector<std::uint32_t> intervals(const SampleBatch& b) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 1; i < b.size(); ++i) out.push_back(static_cast<std::uint32_t>(b.timestamps[i] - b.timestamps[i - 1]));
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("wsense_test_" + name);
}

}  // namespace

TEST_CASE("presets are valid and match their nominal periods") {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    CHECK_NOTHROW(validate(m));
    CHECK(m.majors.size() >= 4);
    CHECK(m.majors.size() <= 7);
  }
  CHECK(preset("100ksps-25C").base_interval_ns == 10000);
  CHECK(preset("500ksps-25C").base_interval_ns == 2000);
  CHECK(preset_for_rate(100000).name == "100ksps-25C");
  CHECK(preset_for_rate(500000).name == "500ksps-25C");
  CHECK_THROWS_AS(preset("1msps"), ConfigError);
  CHECK_THROWS_AS(preset_for_rate(250000), ConfigError);
}

TEST_CASE("interval variation stays within the preset spread") {
  for (const auto& [name, spread] : std::map<std::string, std::int64_t>{{"100ksps-25C", 110}, {"500ksps-25C", 16}}) {
    const auto m = preset(name);
    const auto trace = generate(m, 200000);
    for (auto iv : intervals(trace)) {
      const auto dev = static_cast<std::int64_t>(iv) - static_cast<std::int64_t>(m.base_interval_ns);
      REQUIRE(std::abs(dev) <= spread);
      REQUIRE(iv % m.quantum_ns == 0);
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  auto m = preset("100ksps-25C");
  const Waveform w = parse_waveform("sine:50:1000");
  const auto a = generate(m, 5000, w);
  const auto b = generate(m, 5000, w);
  CHECK(a == b);
  m.seed = 2;
  CHECK_FALSE(generate(m, 5000, w) == a);
}

TEST_CASE("consecutive next() calls continue one timeline") {
  const auto m = preset("500ksps-25C");
  TraceGenerator g(m, {}, 1000);
  auto first = g.next(300);
  const auto second = g.next(700);
  first.append(second);
  CHECK(first == generate(m, 1000, {}, 1000));
}

TEST_CASE("single major class without outliers gives exact base intervals") {
  IntervalModel m;
  m.base_interval_ns = 10000;
  m.majors = {{0, 1.0}};
  const auto trace = generate(m, 1000);
  for (auto iv : intervals(trace)) REQUIRE(iv == 10000);
  const auto st = interval_stats(trace);
  CHECK(st.class_count == 1);
  CHECK(st.top.at(0).share == doctest::Approx(1.0));
  CHECK(st.outlier_share == 0.0);
}

TEST_CASE("invalid models are rejected") {
  IntervalModel m;
  m.majors = {{0, 0.5}};
  CHECK_THROWS_AS(validate(m), ConfigError);
  m.majors = {{0, 0.5}, {30, 0.5}};
  CHECK_THROWS_AS(validate(m), ConfigError);  // 30 is not a multiple of 25
  m.majors = {{0, 0.5}, {-10000, 0.5}};
  CHECK_THROWS_AS(validate(m), ConfigError);
  m.majors = {{0, 0.99}};
  m.outlier_probability = 0.01;
  m.outlier_spread_ns = 10;  // no quantized offset besides 0
  CHECK_THROWS_AS(validate(m), ConfigError);
  m.majors.clear();
  CHECK_THROWS_AS(validate(m), ConfigError);
  CHECK_THROWS_AS(generate(m, 10), ConfigError);
}

TEST_CASE("100ksps preset: top-6 share, rare classes and outlier share") {
  const auto m = preset("100ksps-25C");
  const std::size_t n = 1000000;
  const auto st = interval_stats(generate(m, n));
  CHECK(st.intervals == n - 1);
  CHECK(st.top_share(6) >= 0.99 - 0.003);

  // Each class outside the majors stays rare.
  for (const auto& c : st.top) {
    const auto off = static_cast<std::int64_t>(c.interval_ns) - 10000;
    const bool major = std::any_of(m.majors.begin(), m.majors.end(), [&](const MajorClass& mc) { return mc.offset_ns == off; });
    if (!major) CHECK(c.share < kRareShare);
  }

  const double p = m.outlier_probability;
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(st.intervals));
  CHECK(std::abs(st.outlier_share - p) <= 3 * sigma);
}

TEST_CASE("class shares pass a chi-squared test at alpha 0.01") {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    const std::size_t n = 1000000;
    IntervalCounter counter;
    TraceGenerator g(m, {});
    for (std::size_t done = 0; done < n; done += 100000) counter.add(g.next(100000));

    std::map<std::int64_t, double> expected;
    for (const auto& c : m.majors) expected[c.offset_ns] += c.probability;
    const auto outs = m.outlier_offsets();
    for (auto off : outs) expected[off] += m.outlier_probability / static_cast<double>(outs.size());

    std::map<std::int64_t, double> observed;
    double total = 0;
    for (const auto& c : counter.classes()) {
      const auto off = static_cast<std::int64_t>(c.interval_ns) - static_cast<std::int64_t>(m.base_interval_ns);
      REQUIRE(expected.count(off) == 1);
      observed[off] += c.count;
      total += c.count;
    }
    double chi2 = 0;
    for (const auto& [off, prob] : expected) {
      const double e = prob * total;
      const double o = observed.count(off) ? observed[off] : 0.0;
      chi2 += (o - e) * (o - e) / e;
    }
    const boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
    CHECK_MESSAGE(chi2 < boost::math::quantile(dist, 0.99), name << " chi2=" << chi2);
  }
}

TEST_CASE("interval stats ranking and counts are exact") {
  SampleBatch b;
  b.timestamps = {0, 10, 20, 32, 42, 54, 64};
  b.samples.assign(7, 0);
  const auto st = interval_stats(b);
  CHECK(st.intervals == 6);
  CHECK(st.class_count == 2);
  REQUIRE(st.top.size() == 2);
  CHECK(st.top[0].interval_ns == 10);
  CHECK(st.top[0].count == 4);
  CHECK(st.top[1].interval_ns == 12);
  CHECK(st.top[1].count == 2);

  IntervalCounter split;
  split.add(b.slice(0, 3));
  split.add(b.slice(3, 4));
  CHECK(split.stats().intervals == 6);
  CHECK(split.stats().top[0].count == 4);
}

TEST_CASE("waveforms") {
  CHECK(parse_waveform("constant").kind == Waveform::Kind::constant);
  CHECK(parse_waveform("constant:100").level == 100);
  const auto s = parse_waveform("sine:50:1000");
  CHECK(s.kind == Waveform::Kind::sine);
  CHECK(s.freq_hz == 50);
  CHECK(s.amplitude == 1000);
  CHECK(parse_waveform("noise:20").kind == Waveform::Kind::noise);
  CHECK_THROWS_AS(parse_waveform("square:1"), ConfigError);
  CHECK_THROWS_AS(parse_waveform("sine:abc:1"), ConfigError);

  IntervalModel m;
  m.majors = {{0, 1.0}};
  const auto flat = generate(m, 100, parse_waveform("constant:1234"));
  for (auto v : flat.samples) CHECK(v == 1234);

  const auto sine = generate(m, 2000, parse_waveform("sine:5000:1000"));
  const auto [lo, hi] = std::minmax_element(sine.samples.begin(), sine.samples.end());
  CHECK(*hi - *lo > 1900);
  CHECK(*hi - *lo <= 2001);
}

TEST_CASE("raw and csv trace files") {
  const auto trace = generate(preset("100ksps-25C"), 1234, parse_waveform("noise:500"));
  const auto raw = temp_file("trace.raw");
  write_raw(raw, trace);
  CHECK(std::filesystem::file_size(raw) == 1234 * 10);
  CHECK(read_raw(raw) == trace);

  const auto csv = temp_file("trace.csv");
  write_csv(csv, trace);
  std::ifstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1234);

  std::ofstream(raw, std::ios::binary) << "123";
  CHECK_THROWS(read_raw(raw));
  std::filesystem::remove(raw);
  std::filesystem::remove(csv);
}
