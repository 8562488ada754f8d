#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace wsense::cli {

struct Global {
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool quiet = false;
  bool json = false;
};

struct GenTraceOpts {
  std::optional<double> rate;
  std::string preset;
  std::uint64_t samples = 0;
  std::string waveform = "sine:50:1000";
  std::string out;
  std::string format = "raw";
  bool stats = false;
};

struct EncodeOpts {
  std::string input;
  std::string encoding = "doenc";
  std::size_t batch = 512;
  std::string out;
  std::uint16_t source = 0;
  std::string timing = "zero";
};

struct DecodeOpts {
  std::string input;
  std::string out;
  std::string format = "raw";
  std::string report;
  std::string headerless;
};

struct SimulateOpts {
  std::string config;
  std::string out;
  std::string events;
  std::string packets;
};

struct EnergyPlanOpts {
  std::string profile;
  double t_idle = 0;
  double t_sample = 0;
  bool solve = false;
  bool check = false;
  std::optional<double> tp;
  std::optional<int> l;
  std::size_t points = 200;
  std::string out;
  std::string feasible_csv;
};

struct SyncPlanOpts {
  double rate = 500000;
  std::optional<double> initial_error_ns;
  std::string layer = "firmware";
  double freq = 160e6;
  double ppm = 2.5;
  std::optional<double> budget_ns;
  std::size_t rows = 11;
  std::string out;
};

struct ServeOpts {
  std::string listen = "0.0.0.0:9000";
  std::string out;
  std::string format = "raw";
  std::uint64_t rotate_bytes = 0;
  std::string headerless;
  std::optional<std::uint64_t> max_packets;
  double duration = 0;
  std::string report;
};

struct ReplayOpts {
  std::string input;
  std::string target;
  bool paced = false;
};

struct SizeSweepOpts {
  std::string method = "all";
  std::size_t s = 512;
  std::size_t from = 1;
  std::optional<std::size_t> to;
  std::size_t step = 1;
  unsigned k_bits = 16;
  unsigned delta_bytes = 1;
  std::string out;
};

int gen_trace(const Global& g, const GenTraceOpts& o);
int encode(const Global& g, const EncodeOpts& o);
int decode(const Global& g, const DecodeOpts& o);
int simulate(const Global& g, const SimulateOpts& o);
int energy_plan(const Global& g, const EnergyPlanOpts& o);
int sync_plan(const Global& g, const SyncPlanOpts& o);
int serve(const Global& g, const ServeOpts& o);
int replay(const Global& g, const ReplayOpts& o);
int size_sweep(const Global& g, const SizeSweepOpts& o);

}  // namespace wsense::cli
