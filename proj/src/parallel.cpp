#include "wsense/parallel.hpp"

#include <exception>

#ifdef WSENSE_HAVE_OPENMP
#include <omp.h>
#endif

namespace wsense::parallel {

bool openmp_enabled() {
#ifdef WSENSE_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef WSENSE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Sequence number each batch starts at: baselines consume one per chunk.
std::vector<std::uint16_t> start_seqs(std::span<const codec::SampleBatch> batches, codec::Encoding method,
                                      std::uint16_t first) {
  std::vector<std::uint16_t> seqs(batches.size());
  const std::size_t per = codec::is_baseline(method) ? codec::max_baseline_samples(method) : 0;
  std::uint16_t seq = first;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    seqs[i] = seq;
    seq = static_cast<std::uint16_t>(seq + (per ? (batches[i].size() + per - 1) / per : 1));
  }
  return seqs;
}

template <class F>
void run_indexed(std::size_t n, F body) {
  std::exception_ptr error;
#ifdef WSENSE_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#ifdef WSENSE_HAVE_OPENMP
#pragma omp critical(wsense_error)
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<Unit> encode_batches_serial(std::span<const codec::SampleBatch> batches, codec::Encoding method,
                                        std::uint16_t first_seq) {
  std::vector<Unit> out;
  out.reserve(batches.size());
  std::uint16_t seq = first_seq;
  for (const auto& b : batches) {
    out.push_back(codec::encode(b, method, seq));
    seq = static_cast<std::uint16_t>(seq + codec::seq_advance(out.back()));
  }
  return out;
}

std::vector<Unit> encode_batches_omp(std::span<const codec::SampleBatch> batches, codec::Encoding method,
                                     std::uint16_t first_seq) {
  const auto seqs = start_seqs(batches, method, first_seq);
  std::vector<Unit> out(batches.size());
  run_indexed(batches.size(), [&](std::size_t i) { out[i] = codec::encode(batches[i], method, seqs[i]); });
  return out;
}

std::vector<codec::SampleBatch> decode_units_serial(std::span<const Unit> units) {
  std::vector<codec::SampleBatch> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(codec::decode(u));
  return out;
}

std::vector<codec::SampleBatch> decode_units_omp(std::span<const Unit> units) {
  std::vector<codec::SampleBatch> out(units.size());
  run_indexed(units.size(), [&](std::size_t i) { out[i] = codec::decode(units[i]); });
  return out;
}

energy::Solution solve_parameters_omp(const energy::EnergyProfile& p, double t_idl, double t_smp,
                                      std::size_t points) {
  energy::validate(p);
  const auto grid = energy::tp_grid(p, points);
  const std::size_t per_l = grid.size();
  const std::size_t n = per_l * energy::kMaxListenCoefficient;
  std::vector<energy::BudgetBreakdown> results(n);
  run_indexed(n, [&](std::size_t i) {
    const int l = static_cast<int>(i / per_l) + 1;
    results[i] = energy::budget_check(p, t_idl, t_smp, grid[i % per_l], l);
  });
  // Reduce in the serial order so ties resolve identically.
  energy::Solution sol;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].pass) continue;
    sol.feasible.push_back({grid[i % per_l], static_cast<int>(i / per_l) + 1, results[i].total});
    if (!sol.best || results[i].total < sol.best->total) sol.best = sol.feasible.back();
  }
  return sol;
}

}  // namespace wsense::parallel
