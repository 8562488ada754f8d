#include <benchmark/benchmark.h>

#include "wsense/energy.hpp"
#include "wsense/parallel.hpp"
#include "wsense/tracegen.hpp"

using namespace wsense;

namespace {

const std::vector<codec::SampleBatch>& batches() {
  static const auto out = [] {
    const std::size_t s = 512, count = 2000;
    const auto trace = tracegen::generate(tracegen::preset("500ksps-25C"), s * count, tracegen::parse_waveform("noise:300"));
    std::vector<codec::SampleBatch> v;
    for (std::size_t i = 0; i < count; ++i) v.push_back(trace.slice(i * s, s));
    return v;
  }();
  return out;
}

template <auto Encode>
void BM_Encode(benchmark::State& state) {
  const auto method = static_cast<codec::Encoding>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Encode(batches(), method, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batches().size() * 512));
}

template <auto Decode>
void BM_Decode(benchmark::State& state) {
  const auto method = static_cast<codec::Encoding>(state.range(0));
  const auto units = parallel::encode_batches_serial(batches(), method);
  for (auto _ : state) benchmark::DoNotOptimize(Decode(units));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batches().size() * 512));
}

void BM_EnergySweepSerial(benchmark::State& state) {
  const auto p = energy::default_profile();
  for (auto _ : state) benchmark::DoNotOptimize(energy::solve_parameters(p, 14 * 86400.0, 1200, state.range(0)));
}

void BM_EnergySweepOmp(benchmark::State& state) {
  const auto p = energy::default_profile();
  for (auto _ : state) benchmark::DoNotOptimize(parallel::solve_parameters_omp(p, 14 * 86400.0, 1200, state.range(0)));
}

void encodings(benchmark::internal::Benchmark* b) {
  for (auto m : codec::kAllEncodings) b->Arg(static_cast<int>(m));
}

}  // namespace

BENCHMARK(BM_Encode<parallel::encode_batches_serial>)->Name("encode/serial")->Apply(encodings)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Encode<parallel::encode_batches_omp>)->Name("encode/omp")->Apply(encodings)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Decode<parallel::decode_units_serial>)->Name("decode/serial")->Apply(encodings)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Decode<parallel::decode_units_omp>)->Name("decode/omp")->Apply(encodings)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnergySweepSerial)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EnergySweepOmp)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
