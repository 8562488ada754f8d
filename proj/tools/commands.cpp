#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wsense/capture.hpp"
#include "wsense/codec.hpp"
#include "wsense/energy.hpp"
#include "wsense/ingest.hpp"
#include "wsense/kvconfig.hpp"
#include "wsense/netsim.hpp"
#include "wsense/timesync.hpp"
#include "wsense/tracegen.hpp"

#ifndef WSENSE_VERSION
#define WSENSE_VERSION "dev"
#endif

namespace wsense::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using codec::Encoding;

namespace {

json run_report(const std::string& command, json config, json metrics, std::uint64_t seed) {
  return {{"command", command},
          {"config", std::move(config)},
          {"metrics", std::move(metrics)},
          {"versions", {{"wsense", WSENSE_VERSION}, {"wire_format", 1}}},
          {"seed", seed}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
}

// Prints the report as JSON with --json, otherwise runs the table printer.
template <class Table>
void emit(const Global& g, const json& report, Table table) {
  if (g.json)
    std::cout << report.dump(2) << '\n';
  else if (!g.quiet)
    table();
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Encoding encoding_flag(const std::string& flag, const std::string& name) {
  if (auto e = codec::parse_encoding(name)) return *e;
  throw ConfigError(flag, "unknown encoding '" + name + "'");
}

std::optional<Encoding> headerless_flag(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const auto e = encoding_flag("--headerless", name);
  if (e != Encoding::B8) throw ConfigError("--headerless", "only b8 frames lack a format header");
  return e;
}

ingest::RecordFormat format_flag(const std::string& name) {
  if (name == "raw") return ingest::RecordFormat::raw;
  if (name == "csv") return ingest::RecordFormat::csv;
  throw ConfigError("--format", "expected raw or csv, got '" + name + "'");
}

void write_trace(const fs::path& path, const codec::SampleBatch& trace, ingest::RecordFormat f) {
  if (f == ingest::RecordFormat::csv)
    tracegen::write_csv(path, trace);
  else
    tracegen::write_raw(path, trace);
}

json stats_json(const tracegen::IntervalStats& s) {
  json top = json::array();
  for (const auto& c : s.top) top.push_back({{"interval_ns", c.interval_ns}, {"count", c.count}, {"share", c.share}});
  return {{"intervals", s.intervals},
          {"class_count", s.class_count},
          {"top", top},
          {"top6_share", s.top_share(6)},
          {"outlier_share", s.outlier_share}};
}

json breakdown_json(const energy::BudgetBreakdown& b) {
  return {{"idle_J", b.idle},
          {"listen_enforce_J", b.listen_enforce},
          {"alert_transition_J", b.alert_transition},
          {"last_node_align_J", b.last_node_align},
          {"sampling_J", b.sampling},
          {"total_J", b.total},
          {"limit_J", b.limit},
          {"pass", b.pass},
          {"warnings", b.warnings}};
}

json profile_json(const energy::EnergyProfile& p) {
  return {{"P_asc", p.P_asc}, {"D_asc", p.D_asc}, {"P_off", p.P_off},
          {"P_bcn", p.P_bcn}, {"P_slp", p.P_slp}, {"D_bcn", p.D_bcn},
          {"E_smp", p.E_smp}, {"E_bat", p.E_bat}, {"usable_fraction", p.usable_fraction},
          {"N", p.N},         {"listen_base", p.listen_base}};
}

void print_breakdown(const energy::BudgetBreakdown& b) {
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "  idle             " << std::setw(14) << b.idle << " J\n"
            << "  listen enforce   " << std::setw(14) << b.listen_enforce << " J\n"
            << "  alert transition " << std::setw(14) << b.alert_transition << " J\n"
            << "  last-node align  " << std::setw(14) << b.last_node_align << " J\n"
            << "  sampling         " << std::setw(14) << b.sampling << " J\n"
            << "  total            " << std::setw(14) << b.total << " J  (limit " << b.limit << " J) "
            << (b.pass ? "PASS" : "FAIL") << '\n';
  for (const auto& w : b.warnings) std::cout << "  warning: " << w << '\n';
  std::cout.unsetf(std::ios::floatfield);
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

// ---------------------------------------------------------------------------------

int gen_trace(const Global& g, const GenTraceOpts& o) {
  tracegen::IntervalModel model;
  try {
    if (!o.preset.empty())
      model = tracegen::preset(o.preset);
    else if (o.rate)
      model = tracegen::preset_for_rate(*o.rate);
    else
      throw ConfigError("--rate", "give --rate or --preset");
  } catch (const tracegen::ConfigError& e) {
    throw ConfigError(o.preset.empty() ? "--rate" : "--preset", e.what());
  }
  if (o.rate && std::abs(model.nominal_rate_sps() - *o.rate) > 1e-6 * *o.rate)
    throw ConfigError("--rate", "does not match preset " + model.name);
  if (o.samples < 1) throw ConfigError("--samples", "must be >= 1");
  model.seed = g.seed;
  tracegen::Waveform wave;
  try {
    wave = tracegen::parse_waveform(o.waveform);
  } catch (const std::exception& e) {
    throw ConfigError("--waveform", e.what());
  }
  const auto fmt = format_flag(o.format);

  const auto trace = tracegen::generate(model, o.samples, wave);
  write_trace(o.out, trace, fmt);

  json metrics{{"samples", trace.size()},
               {"duration_ns", trace.timestamps.back() - trace.timestamps.front()},
               {"nominal_rate_sps", model.nominal_rate_sps()}};
  tracegen::IntervalStats st;
  if (o.stats) {
    st = tracegen::interval_stats(trace);
    metrics["intervals"] = stats_json(st);
  }
  const json config{{"preset", model.name}, {"samples", o.samples}, {"waveform", o.waveform},
                    {"out", o.out},         {"format", o.format}};
  emit(g, run_report("gen-trace", config, metrics, g.seed), [&] {
    std::cout << "wrote " << trace.size() << " samples (" << model.name << ") to " << o.out << '\n';
    if (!o.stats) return;
    std::cout << "distinct intervals: " << st.class_count << "\n  interval_ns      count    share\n";
    for (const auto& c : st.top)
      std::cout << "  " << std::setw(11) << c.interval_ns << std::setw(11) << c.count << "  " << std::fixed
                << std::setprecision(4) << c.share << '\n';
    std::cout << "top-6 share " << st.top_share(6) << ", rare-class share " << st.outlier_share << '\n';
  });
  return 0;
}

int encode(const Global& g, const EncodeOpts& o) {
  const auto method = encoding_flag("--encoding", o.encoding);
  if (o.batch < codec::kMinBatch || o.batch > codec::kMaxBatch) throw ConfigError("--batch", "must be in [2, 4096]");
  const auto timing = netsim::timing_preset(o.timing);
  const auto trace = tracegen::read_raw(o.input);

  std::vector<CapturedPacket> out;
  std::uint16_t seq = 0;
  std::size_t batches = 0, splits = 0, dropped_tail = 0;
  std::uint64_t bytes = 0;
  for (std::size_t first = 0; first < trace.size(); first += o.batch) {
    const std::size_t n = std::min(o.batch, trace.size() - first);
    if (n < codec::kMinBatch) {
      dropped_tail = n;
      break;
    }
    const auto batch = trace.slice(first, n);
    const auto packets = codec::encode(batch, method, seq);
    seq = static_cast<std::uint16_t>(seq + codec::seq_advance(packets));
    ++batches;
    if (packets.size() == 2 && packets[0].type != codec::PacketType::single) ++splits;
    std::uint64_t t = batch.timestamps.back() + netsim::encode_time_ns(timing, method, n);
    for (const auto& p : packets) {
      t += timing.t_prep_ns + timing.t_proc_ns;
      bytes += p.bytes.size();
      out.push_back({t, o.source, p.bytes});
    }
  }
  write_capture(o.out, out);

  const double per_sample = trace.empty() ? 0.0 : static_cast<double>(bytes) / static_cast<double>(trace.size() - dropped_tail);
  const json metrics{{"samples", trace.size() - dropped_tail}, {"dropped_tail_samples", dropped_tail},
                     {"batches", batches},                     {"packets", out.size()},
                     {"split_batches", splits},                {"bytes", bytes},
                     {"bytes_per_sample", per_sample}};
  const json config{{"input", o.input}, {"encoding", std::string(codec::to_string(method))}, {"batch", o.batch},
                    {"out", o.out},     {"source", o.source},                                  {"timing", timing.name}};
  emit(g, run_report("encode", config, metrics, g.seed), [&] {
    std::cout << "encoded " << batches << " batches into " << out.size() << " packets (" << bytes << " bytes, "
              << std::fixed << std::setprecision(3) << per_sample << " B/sample, " << splits << " split)\n";
    if (dropped_tail) std::cout << "dropped " << dropped_tail << " trailing sample(s): batch needs >= 2\n";
  });
  return 0;
}

int decode(const Global& g, const DecodeOpts& o) {
  const auto headerless = headerless_flag(o.headerless);
  const auto fmt = format_flag(o.format);
  const auto packets = read_capture(o.input);

  std::map<std::uint32_t, codec::SampleBatch> traces;
  const auto report = ingest::ingest_capture(packets, headerless, [&](std::uint32_t src, const std::string&,
                                                                      const codec::SampleBatch& b) {
    traces[src].append(b);
  });

  std::vector<std::string> written;
  for (const auto& [src, trace] : traces) {
    fs::path path = o.out;
    if (traces.size() > 1)
      path = path.parent_path() / (path.stem().string() + "_src" + std::to_string(src) + path.extension().string());
    write_trace(path, trace, fmt);
    written.push_back(path.string());
  }
  if (!o.report.empty()) write_json(o.report, ingest::to_json(report));

  const json config{{"input", o.input}, {"out", o.out}, {"format", o.format}, {"headerless", o.headerless}};
  json metrics = ingest::to_json(report);
  metrics["files"] = written;
  emit(g, run_report("decode", config, metrics, g.seed), [&] {
    const auto& t = report.total;
    std::cout << "packets " << t.packets << "/" << t.datagrams << ", samples " << t.samples << ", lost " << t.losses
              << ", decode errors " << t.decode_errors << ", duplicates " << t.duplicates << '\n';
    for (const auto& f : written) std::cout << "wrote " << f << '\n';
  });
  return 0;
}

int simulate(const Global& g, const SimulateOpts& o) {
  const auto kv = o.config.empty() ? KvConfig{} : KvConfig::load(o.config);
  auto cfg = netsim::load_sim_config(kv);
  if (g.seed_given) cfg.seed = g.seed;
  cfg.record_packets = !o.packets.empty();
  if (!o.events.empty()) cfg.record_events = true;

  const auto m = netsim::run(cfg);
  if (!o.events.empty()) netsim::write_events_csv(o.events, m.events);
  if (!o.packets.empty()) write_capture(o.packets, m.packets);

  json nodes = json::array();
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const auto& n = m.nodes[i];
    nodes.push_back({{"node", i},
                     {"samples_generated", n.samples_generated},
                     {"samples_encoded", n.samples_encoded},
                     {"samples_dropped", n.samples_dropped},
                     {"samples_received", n.samples_received},
                     {"batches", n.batches},
                     {"packets_sent", n.packets_sent},
                     {"packets_lost", n.packets_lost},
                     {"packets_received", n.packets_received},
                     {"bytes_sent", n.bytes_sent},
                     {"bytes_received", n.bytes_received},
                     {"jittered_intervals", n.jittered_intervals},
                     {"intervals", n.intervals},
                     {"alert_enter_ns", n.alert_enter_ns},
                     {"sampling_enter_ns", n.sampling_enter_ns},
                     {"sampling_exit_ns", n.sampling_exit_ns},
                     {"effective_rate_sps", opt(n.effective_rate_sps)},
                     {"data_rate_bps", opt(n.data_rate_bps)},
                     {"mean_packet_bytes", n.mean_packet_bytes}});
  }
  const json metrics{{"nominal_rate_sps", m.nominal_rate_sps},
                     {"effective_rate_sps", opt(m.effective_rate_sps)},
                     {"data_rate_bps", opt(m.data_rate_bps)},
                     {"i2a_measured_s", m.i2a_measured_s},
                     {"i2a_analytic_s", m.i2a_analytic_s},
                     {"a2s_measured_s", m.a2s_measured_s},
                     {"a2s_bound_s", m.a2s_bound_s},
                     {"sync_period_s", m.sync_period_s},
                     {"sync_bound_ns", m.sync_bound_ns},
                     {"max_pairwise_sync_error_ns", m.max_pairwise_sync_error_ns},
                     {"energy", breakdown_json(m.energy)},
                     {"events", m.events.size()},
                     {"nodes", nodes}};
  const json config{{"config_file", o.config},
                    {"nodes", cfg.nodes},
                    {"rate_sps", cfg.rate_sps},
                    {"interval_preset", cfg.interval_preset},
                    {"waveform", cfg.waveform},
                    {"encoding", std::string(codec::to_string(cfg.encoding))},
                    {"batch", cfg.batch},
                    {"timing",
                     {{"name", cfg.timing.name},
                      {"t_prep_ns", cfg.timing.t_prep_ns},
                      {"t_proc_ns", cfg.timing.t_proc_ns},
                      {"blocking", cfg.timing.blocking},
                      {"jitter_max_ns", cfg.timing.jitter_max_ns},
                      {"jitter_intervals_per_send", cfg.timing.jitter_intervals_per_send},
                      {"t_encode_ns", cfg.timing.t_encode_ns ? json(*cfg.timing.t_encode_ns) : json(nullptr)}}},
                    {"t_idle_s", cfg.t_idle_s},
                    {"t_alert_s", cfg.t_alert_s},
                    {"t_sample_s", cfg.t_sample_s},
                    {"t_p", cfg.t_p},
                    {"l", cfg.l},
                    {"serialized_association", cfg.coordinated_association},
                    {"beacon_alignment", cfg.beacon_alignment},
                    {"loss_probability", cfg.loss_probability},
                    {"link_overhead_bytes", cfg.link_overhead_bytes},
                    {"sync_layer", cfg.sync_layer},
                    {"sync_period_s", cfg.sync_period_s},
                    {"clock_f", cfg.clock_f},
                    {"clock_nu", cfg.clock_nu},
                    {"energy", profile_json(cfg.profile)}};
  const auto report = run_report("simulate", config, metrics, cfg.seed);
  if (!o.out.empty()) write_json(o.out, report);

  emit(g, report, [&] {
    auto show = [](const std::optional<double>& v, double scale) {
      std::ostringstream s;
      if (v)
        s << std::fixed << std::setprecision(1) << *v * scale;
      else
        s << "n/a";
      return s.str();
    };
    std::cout << "node  eff.rate(ksps)  data(kB/s)  sent  lost  dropped\n";
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
      const auto& n = m.nodes[i];
      std::cout << std::setw(4) << i << std::setw(16) << show(n.effective_rate_sps, 1e-3) << std::setw(12)
                << show(n.data_rate_bps, 1e-3) << std::setw(6) << n.packets_sent << std::setw(6) << n.packets_lost
                << std::setw(9) << n.samples_dropped << '\n';
    }
    std::cout << "mean effective rate " << show(m.effective_rate_sps, 1e-3) << " ksps of "
              << m.nominal_rate_sps * 1e-3 << " nominal\n"
              << "I2A " << m.i2a_measured_s << " s (analytic " << m.i2a_analytic_s << " s), A2S " << m.a2s_measured_s
              << " s (bound " << m.a2s_bound_s << " s)\n"
              << "sync period " << m.sync_period_s << " s, max pairwise error " << m.max_pairwise_sync_error_ns
              << " ns\n"
              << "energy " << m.energy.total << " J of " << m.energy.limit << " J "
              << (m.energy.pass ? "PASS" : "FAIL") << '\n';
  });
  return 0;
}

int energy_plan(const Global& g, const EnergyPlanOpts& o) {
  if (o.solve == o.check) throw ConfigError("--solve", "give exactly one of --solve or --check");
  const auto kv = o.profile.empty() ? KvConfig{} : KvConfig::load(o.profile);
  const auto p = energy::load_profile(kv);
  kv.reject_unknown();
  if (o.t_idle < 0) throw ConfigError("--t-idle", "must be >= 0");
  if (o.t_sample < 0) throw ConfigError("--t-sample", "must be >= 0");

  json config{{"profile_file", o.profile}, {"profile", profile_json(p)}, {"t_idle_s", o.t_idle},
              {"t_sample_s", o.t_sample},  {"mode", o.solve ? "solve" : "check"}};
  json metrics;
  std::function<void()> table;

  if (o.check) {
    if (!o.tp) throw ConfigError("--tp", "required with --check");
    if (!o.l) throw ConfigError("--l", "required with --check");
    if (*o.l < 1 || *o.l > energy::kMaxListenCoefficient) throw ConfigError("--l", "must be in [1, 10]");
    if (!(*o.tp > p.D_asc)) throw ConfigError("--tp", "must exceed D_asc");
    config["t_p"] = *o.tp;
    config["l"] = *o.l;
    const auto b = energy::budget_check(p, o.t_idle, o.t_sample, *o.tp, *o.l);
    const double p_idle = energy::periodic_association_power(p, *o.tp);
    metrics = breakdown_json(b);
    metrics["idle_power_W"] = p_idle;
    metrics["beacon_power_W"] = energy::beacon_reception_power(p, *o.l);
    metrics["idle_lifetime_s"] = energy::lifetime(p_idle, p.E_bat, p.usable_fraction);
    table = [=] {
      std::cout << "t_p = " << *o.tp << " s, l = " << *o.l << '\n';
      print_breakdown(b);
    };
  } else {
    if (o.points < 1) throw ConfigError("--points", "must be >= 1");
    config["points"] = o.points;
    const auto sol = energy::solve_parameters(p, o.t_idle, o.t_sample, o.points);
    metrics = {{"feasible", sol.feasible.size()}, {"infeasible", sol.infeasible()}};
    if (sol.best) {
      const auto b = energy::budget_check(p, o.t_idle, o.t_sample, sol.best->t_p, sol.best->l);
      metrics["best"] = {{"t_p", sol.best->t_p}, {"l", sol.best->l}, {"breakdown", breakdown_json(b)}};
    }
    if (!o.feasible_csv.empty()) {
      std::ofstream f(o.feasible_csv);
      if (!f) throw std::runtime_error("cannot open " + o.feasible_csv + " for writing");
      f << "t_p,l,total_J\n" << std::setprecision(10);
      for (const auto& c : sol.feasible) f << c.t_p << ',' << c.l << ',' << c.total << '\n';
    }
    table = [=] {
      if (!sol.best) {
        std::cout << "no (t_p, l) satisfies the budget\n";
        return;
      }
      std::cout << sol.feasible.size() << " feasible (t_p, l) pairs; minimum energy at t_p = " << sol.best->t_p
                << " s, l = " << sol.best->l << '\n';
      print_breakdown(energy::budget_check(p, o.t_idle, o.t_sample, sol.best->t_p, sol.best->l));
    };
  }
  const auto report = run_report("energy-plan", config, metrics, g.seed);
  if (!o.out.empty()) write_json(o.out, report);
  emit(g, report, table);
  return 0;
}

int sync_plan(const Global& g, const SyncPlanOpts& o) {
  if (!(o.rate > 0)) throw ConfigError("--rate", "must be > 0");
  if (!(o.freq > 0)) throw ConfigError("--freq", "must be > 0");
  if (!(o.ppm > 0)) throw ConfigError("--ppm", "must be > 0");
  if (o.rows < 2) throw ConfigError("--rows", "must be >= 2");
  double initial = 0;
  if (o.initial_error_ns) {
    initial = *o.initial_error_ns;
  } else {
    try {
      initial = timesync::sync_error_bound_ns(o.layer);
    } catch (const std::exception& e) {
      throw ConfigError("--layer", e.what());
    }
  }
  if (initial < 0) throw ConfigError("--initial-error-ns", "must be >= 0");
  const double nu = o.ppm * 1e-6;
  double period = 0;
  try {
    period = timesync::max_sync_period(o.rate, initial, o.freq, nu, o.budget_ns);
  } catch (const timesync::DomainError& e) {
    throw ConfigError(o.budget_ns ? "--budget-ns" : "--initial-error-ns", e.what());
  }
  const auto rows = timesync::divergence_table(initial, o.freq, nu, period, o.rows);

  std::ostringstream csv;
  csv << "t_s,divergence_ns\n" << std::setprecision(10);
  for (const auto& r : rows) csv << r.t_s << ',' << r.divergence_ns << '\n';
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw std::runtime_error("cannot open " + o.out + " for writing");
    f << csv.str();
  }

  json table = json::array();
  for (const auto& r : rows) table.push_back({{"t_s", r.t_s}, {"divergence_ns", r.divergence_ns}});
  const json config{{"rate_sps", o.rate},   {"initial_error_ns", initial}, {"freq_hz", o.freq},
                    {"ppm", o.ppm},         {"budget_ns", opt(o.budget_ns)}, {"rows", o.rows}};
  const json metrics{{"peak_freq_deviation_hz", timesync::peak_freq_deviation(o.freq, nu)},
                     {"drift_ns_per_s", timesync::drift_per_second(o.freq, nu) * 1e9},
                     {"sync_period_s", period},
                     {"sync_packets_per_s", 1.0 / period},
                     {"sync_bytes_per_s", static_cast<double>(timesync::kSyncPayloadBytes) / period},
                     {"divergence", table}};
  emit(g, run_report("sync-plan", config, metrics, g.seed), [&] {
    std::cout << "sync period " << period << " s (drift " << timesync::drift_per_second(o.freq, nu) * 1e9
              << " ns/s, initial error " << initial << " ns)\n"
              << csv.str();
  });
  return 0;
}

int serve(const Global& g, const ServeOpts& o) {
  const auto headerless = headerless_flag(o.headerless);
  const auto fmt = format_flag(o.format);
  if (o.out.empty()) throw ConfigError("--out", "output directory required");
  if (o.duration < 0) throw ConfigError("--duration", "must be >= 0");

  ingest::RecordWriter writer(o.out, fmt, o.rotate_bytes);
  std::mutex write_mu;
  ingest::Ingestor ingestor(headerless, [&](std::uint32_t src, const std::string& name, const codec::SampleBatch& b) {
    std::lock_guard lock(write_mu);
    writer.write(src, name, b);
  });
  std::unique_ptr<ingest::UdpServer> server;
  try {
    server = std::make_unique<ingest::UdpServer>(o.listen);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--listen", e.what());
  }
  if (!g.quiet) std::cerr << "listening on port " << server->port() << std::endl;

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::thread timer;
  std::atomic<bool> done{false};
  if (o.duration > 0) {
    timer = std::thread([&] {
      const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(o.duration);
      while (!done && std::chrono::steady_clock::now() < end) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      g_stop = true;
    });
  }
  const auto received = server->serve(ingestor, g_stop, o.max_packets);
  done = true;
  if (timer.joinable()) timer.join();
  ingestor.flush();

  const auto report = ingestor.report();
  if (!o.report.empty()) write_json(o.report, ingest::to_json(report));
  json metrics = ingest::to_json(report);
  metrics["received_datagrams"] = received;
  json files = json::array();
  for (const auto& f : writer.files()) files.push_back(f.string());
  metrics["files"] = files;
  const json config{{"listen", o.listen},         {"port", server->port()},     {"out", o.out},
                    {"format", o.format},         {"rotate_bytes", o.rotate_bytes}, {"headerless", o.headerless},
                    {"duration_s", o.duration}};
  emit(g, run_report("serve", config, metrics, g.seed), [&] {
    const auto& t = report.total;
    std::cout << "received " << received << " datagrams from " << report.sources.size() << " source(s): "
              << t.samples << " samples, " << t.losses << " lost, " << t.decode_errors << " malformed\n";
  });
  return 0;
}

int replay(const Global& g, const ReplayOpts& o) {
  const auto packets = read_capture(o.input);
  try {
    ingest::udp_replay(o.target, packets, o.paced);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--target", e.what());
  }
  const json config{{"input", o.input}, {"target", o.target}, {"paced", o.paced}};
  emit(g, run_report("replay", config, {{"packets", packets.size()}}, g.seed),
       [&] { std::cout << "sent " << packets.size() << " packets to " << o.target << '\n'; });
  return 0;
}

int size_sweep(const Global& g, const SizeSweepOpts& o) {
  std::vector<Encoding> methods;
  if (o.method == "all")
    methods = {Encoding::IENC, Encoding::OENC, Encoding::DOENC};
  else
    methods = {encoding_flag("--method", o.method)};
  if (o.s < codec::kMinBatch || o.s > codec::kMaxBatch) throw ConfigError("--s", "must be in [2, 4096]");
  const std::size_t to = o.to.value_or(o.s - 1);
  if (o.from < 1 || o.from > to) throw ConfigError("--from", "must be in [1, --to]");
  if (to > o.s - 1) throw ConfigError("--to", "must be <= s - 1");
  if (o.step < 1) throw ConfigError("--step", "must be >= 1");
  if (o.k_bits < 1 || o.k_bits > 32) throw ConfigError("--k-bits", "must be in [1, 32]");
  if (o.delta_bytes != 1 && o.delta_bytes != 2 && o.delta_bytes != 4)
    throw ConfigError("--delta-bytes", "must be 1, 2 or 4");

  codec::SizeParams params;
  params.tst_bits = o.k_bits;
  params.delta_bytes = o.delta_bytes;

  // Baseline reference: total bytes to carry s samples in as many frames as needed.
  auto baseline_total = [&](Encoding m) {
    const auto per = codec::max_baseline_samples(m);
    const auto full = o.s / per, rest = o.s % per;
    return full * codec::packet_size(m, per, 0, 0) + (rest ? codec::packet_size(m, rest, 0, 0) : 0);
  };

  std::ostringstream csv;
  csv << "method,s,class_count,outliers,size_bytes,fits_mtu\n";
  json rows = json::array();
  for (Encoding m : {Encoding::B8, Encoding::B6}) {
    const auto total = baseline_total(m);
    csv << codec::to_string(m) << ',' << o.s << ",,," << total << ',' << (total <= codec::kMtuPayload) << '\n';
    rows.push_back({{"method", std::string(codec::to_string(m))}, {"size_bytes", total}});
  }
  for (Encoding m : methods) {
    if (codec::is_baseline(m)) continue;
    for (std::size_t c = o.from; c <= to; c += o.step) {
      const std::size_t outliers = m == Encoding::IENC ? 0 : (c > codec::kMajorClasses ? c - codec::kMajorClasses : 0);
      const auto size = codec::packet_size(m, o.s, c, outliers, params);
      csv << codec::to_string(m) << ',' << o.s << ',' << c << ',' << outliers << ',' << size << ','
          << (size <= codec::kMtuPayload) << '\n';
      rows.push_back({{"method", std::string(codec::to_string(m))},
                      {"class_count", c},
                      {"outliers", outliers},
                      {"size_bytes", size}});
    }
  }
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw std::runtime_error("cannot open " + o.out + " for writing");
    f << csv.str();
  }
  const json config{{"method", o.method}, {"s", o.s},       {"from", o.from},          {"to", to},
                    {"step", o.step},     {"k_bits", o.k_bits}, {"delta_bytes", o.delta_bytes}};
  emit(g, run_report("size-sweep", config, {{"rows", rows}}, g.seed), [&] {
    if (o.out.empty()) std::cout << csv.str();
    else std::cout << "wrote " << rows.size() << " rows to " << o.out << '\n';
  });
  return 0;
}

}  // namespace wsense::cli
