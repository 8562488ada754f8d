#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "wsense/bits.hpp"
#include "wsense/codec.hpp"
#include "wsense/kvconfig.hpp"

using namespace wsense::cli;

int main(int argc, char** argv) {
  CLI::App app{"Wireless sensing toolkit: trace generation, timestamp codecs, network simulation and ingest"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  auto* seed = app.add_option("--seed", g.seed, "RNG seed (default 1)");
  app.add_flag("--quiet,-q", g.quiet, "Suppress tables");
  app.add_flag("--json", g.json, "Print the run report as JSON");

  GenTraceOpts gt;
  auto* c_gen = app.add_subcommand("gen-trace", "Generate a synthetic ADC trace");
  c_gen->add_option("--rate", gt.rate, "Nominal sampling rate (100000 or 500000)");
  c_gen->add_option("--preset", gt.preset, "Interval model: 100ksps-25C, 500ksps-25C");
  c_gen->add_option("--samples", gt.samples, "Number of samples")->required();
  c_gen->add_option("--waveform", gt.waveform, "constant[:level] | sine:<hz>:<amp> | noise:<amp>");
  c_gen->add_option("--out", gt.out, "Output trace file")->required();
  c_gen->add_option("--format", gt.format, "raw or csv");
  c_gen->add_flag("--stats", gt.stats, "Print the interval class distribution");

  EncodeOpts en;
  auto* c_enc = app.add_subcommand("encode", "Encode a raw trace into a packet capture");
  c_enc->add_option("--input", en.input, "Raw trace file")->required()->check(CLI::ExistingFile);
  c_enc->add_option("--encoding", en.encoding, "b8, b6, ienc, oenc, doenc");
  c_enc->add_option("--batch", en.batch, "Samples per batch (2..4096)");
  c_enc->add_option("--out", en.out, "Packet capture file")->required();
  c_enc->add_option("--source", en.source, "Source id recorded in the capture");
  c_enc->add_option("--timing", en.timing, "Pipeline preset used for receive times");

  DecodeOpts de;
  auto* c_dec = app.add_subcommand("decode", "Decode a packet capture into trace files");
  c_dec->add_option("--input", de.input, "Packet capture file")->required()->check(CLI::ExistingFile);
  c_dec->add_option("--out", de.out, "Output trace file (suffixed per source when several)")->required();
  c_dec->add_option("--format", de.format, "raw or csv");
  c_dec->add_option("--report", de.report, "Ingest report (JSON)");
  c_dec->add_option("--headerless", de.headerless, "Treat frames as headerless b8");

  SimulateOpts si;
  auto* c_sim = app.add_subcommand("simulate", "Run the network simulation");
  c_sim->add_option("--config", si.config, "Simulation config (INI)")->check(CLI::ExistingFile);
  c_sim->add_option("--out", si.out, "Metrics report (JSON)");
  c_sim->add_option("--events", si.events, "Event log (CSV)");
  c_sim->add_option("--packets", si.packets, "Capture of the packets the server received");

  EnergyPlanOpts ep;
  auto* c_energy = app.add_subcommand("energy-plan", "Check or solve the energy budget");
  c_energy->add_option("--profile", ep.profile, "Energy profile (key = value, SI units)")->check(CLI::ExistingFile);
  c_energy->add_option("--t-idle", ep.t_idle, "Idle Phase length (s)")->required();
  c_energy->add_option("--t-sample", ep.t_sample, "Sampling Phase length (s)")->required();
  c_energy->add_flag("--solve", ep.solve, "Search (t_p, l) for minimum energy");
  c_energy->add_flag("--check", ep.check, "Check one (t_p, l)");
  c_energy->add_option("--tp", ep.tp, "Association period (s)");
  c_energy->add_option("--l", ep.l, "Listen interval coefficient (1..10)");
  c_energy->add_option("--points", ep.points, "t_p grid points for --solve");
  c_energy->add_option("--out", ep.out, "Report (JSON)");
  c_energy->add_option("--feasible-csv", ep.feasible_csv, "All feasible (t_p, l) pairs (CSV)");

  SyncPlanOpts sp;
  auto* c_sync = app.add_subcommand("sync-plan", "Sync period and divergence table");
  c_sync->add_option("--rate", sp.rate, "Sampling rate (sps)");
  c_sync->add_option("--initial-error-ns", sp.initial_error_ns, "Pairwise error right after a sync");
  c_sync->add_option("--layer", sp.layer, "firmware, driver or dual-stack (sets the initial error)");
  c_sync->add_option("--freq", sp.freq, "Oscillator frequency (Hz)");
  c_sync->add_option("--ppm", sp.ppm, "Oscillator tolerance (ppm)");
  c_sync->add_option("--budget-ns", sp.budget_ns, "Error budget (default one sample interval)");
  c_sync->add_option("--rows", sp.rows, "Divergence table rows");
  c_sync->add_option("--out", sp.out, "Divergence table (CSV)");

  ServeOpts sv;
  auto* c_serve = app.add_subcommand("serve", "Receive sensor datagrams over UDP");
  c_serve->add_option("--listen", sv.listen, "host:port (port 0 picks one)");
  c_serve->add_option("--out", sv.out, "Record directory")->required();
  c_serve->add_option("--format", sv.format, "raw or csv");
  c_serve->add_option("--rotate-bytes", sv.rotate_bytes, "Rotate record files at this size (0: never)");
  c_serve->add_option("--headerless", sv.headerless, "Treat frames as headerless b8");
  c_serve->add_option("--max-packets", sv.max_packets, "Stop after this many datagrams");
  c_serve->add_option("--duration", sv.duration, "Stop after this many seconds (0: until SIGINT)");
  c_serve->add_option("--report", sv.report, "Ingest report (JSON) written on exit");

  ReplayOpts rp;
  auto* c_replay = app.add_subcommand("replay", "Send a packet capture over UDP");
  c_replay->add_option("--input", rp.input, "Packet capture file")->required()->check(CLI::ExistingFile);
  c_replay->add_option("--target", rp.target, "host:port")->required();
  c_replay->add_flag("--paced", rp.paced, "Follow the recorded receive times");

  SizeSweepOpts ss;
  auto* c_sweep = app.add_subcommand("size-sweep", "Packet size against class count");
  c_sweep->add_option("--method", ss.method, "ienc, oenc, doenc or all");
  c_sweep->add_option("--s", ss.s, "Batch size");
  c_sweep->add_option("--from", ss.from, "First class count");
  c_sweep->add_option("--to", ss.to, "Last class count (default s - 1)");
  c_sweep->add_option("--step", ss.step, "Class count step");
  c_sweep->add_option("--k-bits", ss.k_bits, "IENC table entry width");
  c_sweep->add_option("--delta-bytes", ss.delta_bytes, "D-OENC delta width");
  c_sweep->add_option("--out", ss.out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  g.seed_given = seed->count() > 0;

  try {
    if (*c_gen) return gen_trace(g, gt);
    if (*c_enc) return encode(g, en);
    if (*c_dec) return decode(g, de);
    if (*c_sim) return simulate(g, si);
    if (*c_energy) return energy_plan(g, ep);
    if (*c_sync) return sync_plan(g, sp);
    if (*c_serve) return serve(g, sv);
    if (*c_replay) return replay(g, rp);
    if (*c_sweep) return size_sweep(g, ss);
  } catch (const wsense::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const wsense::codec::CodecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const wsense::DecodeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
