#include <doctest.h>

#include "oracles.hpp"
#include "wsense/parallel.hpp"
#include "wsense/tracegen.hpp"

using namespace wsense;
using namespace wsense::parallel;

namespace {

std::vector<codec::SampleBatch> batches_of(std::size_t count, std::size_t s) {
  const auto trace = tracegen::generate(tracegen::preset("100ksps-25C"), count * s, tracegen::parse_waveform("noise:200"));
  std::vector<codec::SampleBatch> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(trace.slice(i * s, s));
  return out;
}

bool same_units(const std::vector<Unit>& a, const std::vector<Unit>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return false;
    for (std::size_t j = 0; j < a[i].size(); ++j)
      if (a[i][j].bytes != b[i][j].bytes || a[i][j].seq != b[i][j].seq) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("batch encode and decode kernels agree with the serial versions") {
  MESSAGE("openmp " << std::string(openmp_enabled() ? "on" : "off") << ", threads " << max_threads());
  const auto batches = batches_of(300, 512);
  for (auto m : codec::kAllEncodings) {
    const auto serial = encode_batches_serial(batches, m, 65500);
    const auto omp = encode_batches_omp(batches, m, 65500);
    CHECK(same_units(serial, omp));
    const auto d1 = decode_units_serial(serial);
    const auto d2 = decode_units_omp(serial);
    CHECK(d1 == d2);
    REQUIRE(d1.size() == batches.size());
    CHECK(d1 == batches);
  }
}

TEST_CASE("sequence numbers continue across batches like a node") {
  const auto batches = batches_of(10, 400);
  const auto units = encode_batches_omp(batches, codec::Encoding::B6, 65534);
  std::uint16_t seq = 65534;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const auto expect = codec::encode(batches[i], codec::Encoding::B6, seq);
    REQUIRE(units[i].size() == expect.size());
    for (std::size_t j = 0; j < expect.size(); ++j) CHECK(units[i][j].bytes == expect[j].bytes);
    seq = static_cast<std::uint16_t>(seq + codec::seq_advance(expect));
  }
}

TEST_CASE("kernels handle split batches") {
  std::mt19937_64 rng(8);
  std::vector<codec::SampleBatch> batches;
  for (int i = 0; i < 40; ++i) batches.push_back(gen::random_batch(rng, 512, gen::Pattern::all_unique));
  const auto a = encode_batches_serial(batches, codec::Encoding::IENC);
  const auto b = encode_batches_omp(batches, codec::Encoding::IENC);
  CHECK(same_units(a, b));
  CHECK(a[0].size() == 2);
  CHECK(decode_units_omp(b) == batches);
}
