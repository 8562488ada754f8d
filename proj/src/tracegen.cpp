#include "wsense/tracegen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace wsense::tracegen {

std::vector<std::int64_t> IntervalModel::outlier_offsets() const {
  std::vector<std::int64_t> out;
  if (quantum_ns == 0) return out;
  const auto q = static_cast<std::int64_t>(quantum_ns);
  const auto limit = static_cast<std::int64_t>(outlier_spread_ns);
  for (std::int64_t off = -(limit / q) * q; off <= limit; off += q) {
    const bool major = std::any_of(majors.begin(), majors.end(),
                                   [&](const MajorClass& m) { return m.offset_ns == off; });
    if (!major) out.push_back(off);
  }
  return out;
}

void validate(const IntervalModel& m) {
  if (m.base_interval_ns == 0) throw ConfigError("base_interval_ns must be positive");
  if (m.quantum_ns == 0) throw ConfigError("quantum_ns must be positive");
  if (m.majors.empty()) throw ConfigError("majors: at least one class required");
  double total = m.outlier_probability;
  for (const auto& c : m.majors) {
    if (c.probability < 0) throw ConfigError("majors: negative probability");
    if (c.offset_ns % static_cast<std::int64_t>(m.quantum_ns) != 0)
      throw ConfigError("majors: offset " + std::to_string(c.offset_ns) + " is not a multiple of quantum_ns");
    if (static_cast<std::int64_t>(m.base_interval_ns) + c.offset_ns <= 0)
      throw ConfigError("majors: offset " + std::to_string(c.offset_ns) + " makes the interval non-positive");
    total += c.probability;
  }
  if (m.outlier_probability < 0) throw ConfigError("outlier_probability must be >= 0");
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("probabilities sum to " + std::to_string(total) + ", expected 1");
  if (m.outlier_probability > 0) {
    if (m.outlier_offsets().empty()) throw ConfigError("outlier_spread_ns leaves no outlier offsets");
    if (m.outlier_spread_ns >= m.base_interval_ns)
      throw ConfigError("outlier_spread_ns must be smaller than base_interval_ns");
  }
}

std::vector<std::string> preset_names() { return {"100ksps-25C", "500ksps-25C"}; }

IntervalModel preset(std::string_view name) {
  IntervalModel m;
  m.name = std::string(name);
  if (name == "100ksps-25C") {
    m.base_interval_ns = 10000;
    m.quantum_ns = 25;
    m.outlier_probability = 0.006;
    m.outlier_spread_ns = 110;
    for (std::int64_t off : {-50, -25, 0, 25, 50}) m.majors.push_back({off, (1.0 - 0.006) / 5});
  } else if (name == "500ksps-25C") {
    m.base_interval_ns = 2000;
    m.quantum_ns = 2;
    m.outlier_probability = 0.01;
    m.outlier_spread_ns = 16;
    for (std::int64_t off : {-4, -2, 0, 2, 4}) m.majors.push_back({off, (1.0 - 0.01) / 5});
  } else {
    throw ConfigError("unknown interval preset '" + std::string(name) + "'");
  }
  return m;
}

IntervalModel preset_for_rate(double rate_sps) {
  if (std::abs(rate_sps - 100000) < 1) return preset("100ksps-25C");
  if (std::abs(rate_sps - 500000) < 1) return preset("500ksps-25C");
  throw ConfigError("no interval preset for rate " + std::to_string(rate_sps) + " sps");
}

namespace {

double parse_number(std::string_view s, std::string_view what) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw ConfigError("waveform: bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_colon(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

Waveform parse_waveform(std::string_view text) {
  const auto parts = split_colon(text);
  Waveform w;
  if (parts[0] == "constant" && parts.size() <= 2) {
    if (parts.size() == 2) w.level = parse_number(parts[1], "level");
  } else if (parts[0] == "sine" && parts.size() == 3) {
    w.kind = Waveform::Kind::sine;
    w.freq_hz = parse_number(parts[1], "frequency");
    w.amplitude = parse_number(parts[2], "amplitude");
  } else if (parts[0] == "noise" && parts.size() == 2) {
    w.kind = Waveform::Kind::noise;
    w.amplitude = parse_number(parts[1], "amplitude");
  } else {
    throw ConfigError("waveform: expected constant[:level], sine:<hz>:<amp> or noise:<amp>, got '" +
                      std::string(text) + "'");
  }
  return w;
}

TraceGenerator::TraceGenerator(IntervalModel model, Waveform waveform, std::uint64_t start_ns)
    : model_(std::move(model)), waveform_(waveform), rng_(model_.seed), next_time_(start_ns) {
  validate(model_);
  double acc = 0;
  for (const auto& c : model_.majors) {
    acc += c.probability;
    cumulative_.push_back(acc);
    offsets_.push_back(c.offset_ns);
  }
  outliers_ = model_.outlier_offsets();
}

std::uint32_t TraceGenerator::next_interval() {
  const double u = uniform01(rng_);
  std::int64_t off = 0;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it != cumulative_.end() || outliers_.empty()) {
    off = offsets_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), offsets_.size() - 1)];
  } else {
    off = outliers_[static_cast<std::size_t>(rng_() % outliers_.size())];
  }
  return static_cast<std::uint32_t>(static_cast<std::int64_t>(model_.base_interval_ns) + off);
}

std::uint16_t TraceGenerator::sample_at(std::uint64_t t_ns) {
  double v = waveform_.level;
  switch (waveform_.kind) {
    case Waveform::Kind::constant: break;
    case Waveform::Kind::sine:
      v += waveform_.amplitude *
           std::sin(2 * std::numbers::pi * waveform_.freq_hz * static_cast<double>(t_ns) * 1e-9);
      break;
    case Waveform::Kind::noise: v += waveform_.amplitude * (2 * uniform01(rng_) - 1); break;
  }
  return static_cast<std::uint16_t>(std::clamp(std::lround(v), 0l, 65535l));
}

SampleBatch TraceGenerator::next(std::size_t n) {
  SampleBatch out;
  out.samples.reserve(n);
  out.timestamps.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.timestamps.push_back(next_time_);
    out.samples.push_back(sample_at(next_time_));
    next_time_ += next_interval();
  }
  return out;
}

SampleBatch generate(const IntervalModel& model, std::size_t n_samples, const Waveform& waveform,
                     std::uint64_t start_ns) {
  if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
  TraceGenerator gen(model, waveform, start_ns);
  return gen.next(n_samples);
}

// ---- statistics ------------------------------------------------------------------

double IntervalStats::top_share(std::size_t k) const {
  double s = 0;
  for (std::size_t i = 0; i < std::min(k, top.size()); ++i) s += top[i].share;
  return s;
}

void IntervalCounter::add(const SampleBatch& chunk) {
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    const auto t = chunk.timestamps[i];
    if (have_last_) {
      const auto iv = static_cast<std::uint32_t>(t - last_);
      auto it = std::lower_bound(index_.begin(), index_.end(), iv,
                                 [](const auto& e, std::uint32_t v) { return e.first < v; });
      if (it != index_.end() && it->first == iv) {
        ++counts_[it->second];
      } else {
        index_.insert(it, {iv, classes_.size()});
        classes_.push_back(iv);
        counts_.push_back(1);
      }
      ++total_;
    }
    last_ = t;
    have_last_ = true;
  }
}

IntervalStats IntervalCounter::stats(double rare_share) const {
  IntervalStats st;
  st.intervals = total_;
  st.class_count = classes_.size();
  if (total_ == 0) return st;
  std::vector<std::size_t> order(classes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts_[a] > counts_[b]; });
  const double n = static_cast<double>(total_);
  for (std::size_t i = 0; i < std::min<std::size_t>(7, order.size()); ++i) {
    const auto j = order[i];
    st.top.push_back({classes_[j], counts_[j], static_cast<double>(counts_[j]) / n});
  }
  for (auto c : counts_) {
    const double share = static_cast<double>(c) / n;
    if (share < rare_share) st.outlier_share += share;
  }
  return st;
}

std::vector<ClassShare> IntervalCounter::classes() const {
  std::vector<ClassShare> out;
  out.reserve(classes_.size());
  const double n = static_cast<double>(total_);
  for (std::size_t i = 0; i < classes_.size(); ++i) out.push_back({classes_[i], counts_[i], static_cast<double>(counts_[i]) / n});
  return out;
}

IntervalStats interval_stats(const SampleBatch& trace, double rare_share) {
  IntervalCounter c;
  c.add(trace);
  return c.stats(rare_share);
}

// ---- files -------------------------------------------------------------------------

void write_raw(const std::filesystem::path& path, const SampleBatch& trace) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::vector<std::uint8_t> buf;
  buf.reserve(trace.size() * 10);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    put_le(buf, trace.timestamps[i], 8);
    put_le(buf, trace.samples[i], 2);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

SampleBatch read_raw(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() % 10 != 0)
    throw std::runtime_error(path.string() + ": size " + std::to_string(buf.size()) + " is not a multiple of 10");
  SampleBatch out;
  const std::size_t n = buf.size() / 10;
  out.samples.resize(n);
  out.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.timestamps[i] = get_le(buf, 10 * i, 8);
    out.samples[i] = static_cast<std::uint16_t>(get_le(buf, 10 * i + 8, 2));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const SampleBatch& trace) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "timestamp_ns,sample\n";
  for (std::size_t i = 0; i < trace.size(); ++i) f << trace.timestamps[i] << ',' << trace.samples[i] << '\n';
}

}  // namespace wsense::tracegen
