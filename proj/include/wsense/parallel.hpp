#pragma once

// Batch-parallel kernels. Each *_omp function has a *_serial twin that
// produces identical output; tests cross-check them and bench/ times them.

#include <span>
#include <vector>

#include "wsense/codec.hpp"
#include "wsense/energy.hpp"

namespace wsense::parallel {

bool openmp_enabled();
int max_threads();

using Unit = std::vector<codec::EncodedPacket>;

/// Sequence numbers continue across batches exactly as a node would assign them.
std::vector<Unit> encode_batches_serial(std::span<const codec::SampleBatch> batches, codec::Encoding method,
                                        std::uint16_t first_seq = 0);
std::vector<Unit> encode_batches_omp(std::span<const codec::SampleBatch> batches, codec::Encoding method,
                                     std::uint16_t first_seq = 0);

std::vector<codec::SampleBatch> decode_units_serial(std::span<const Unit> units);
std::vector<codec::SampleBatch> decode_units_omp(std::span<const Unit> units);

/// Same result as energy::solve_parameters.
energy::Solution solve_parameters_omp(const energy::EnergyProfile& p, double t_idl, double t_smp,
                                      std::size_t points = 200);

}  // namespace wsense::parallel
