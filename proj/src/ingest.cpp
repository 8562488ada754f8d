#include "wsense/ingest.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace wsense::ingest {

std::uint64_t monotonic_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// ---- StreamAssembler -------------------------------------------------------------

void StreamAssembler::emit(SampleBatch batch, std::vector<SampleBatch>& out) {
  if (last_emitted_ts_ && batch.timestamps.front() <= *last_emitted_ts_) {
    ++c_.out_of_order;
    return;
  }
  last_emitted_ts_ = batch.timestamps.back();
  c_.samples += batch.size();
  out.push_back(std::move(batch));
}

void StreamAssembler::flush_into(std::vector<SampleBatch>& out) {
  if (!pending_) return;
  auto p = std::move(*pending_);
  pending_.reset();
  if (p.halves[0] && p.halves[1]) {
    ++c_.split_pairs;
    p.halves[0]->append(*p.halves[1]);
    emit(std::move(*p.halves[0]), out);
    return;
  }
  ++c_.split_partial;
  for (auto& h : p.halves)
    if (h) emit(std::move(*h), out);
}

std::vector<SampleBatch> StreamAssembler::flush() {
  std::vector<SampleBatch> out;
  flush_into(out);
  return out;
}

std::vector<SampleBatch> StreamAssembler::ingest(std::span<const std::uint8_t> bytes, std::uint64_t recv_time_ns) {
  std::vector<SampleBatch> out;
  ++c_.datagrams;
  codec::EncodedPacket pkt;
  SampleBatch batch;
  try {
    pkt = codec::parse_frame(bytes, headerless_);
    batch = codec::decode_packet(pkt);
  } catch (const std::exception&) {
    ++c_.decode_errors;
    return out;
  }

  ++c_.packets;
  c_.bytes += bytes.size();
  auto& enc = c_.by_encoding[static_cast<std::size_t>(pkt.encoding)];
  ++enc.packets;
  enc.bytes += bytes.size();
  enc.samples += batch.size();
  // Only packets that contribute records count towards the receive rates.
  auto account = [&] {
    if (recv_bytes_ == 0) {
      first_recv_ = recv_time_ns;
      first_samples_ = batch.size();
      first_bytes_ = bytes.size();
    }
    last_recv_ = std::max(last_recv_, recv_time_ns);
    recv_samples_ += batch.size();
    recv_bytes_ += bytes.size();
  };

  if (last_seq_) {
    const auto delta = static_cast<std::uint16_t>(pkt.seq - *last_seq_);
    if (delta == 0) {
      const int slot = static_cast<int>(pkt.type) - 1;
      if (pending_ && pending_->seq == pkt.seq && slot >= 0 && !pending_->halves[static_cast<std::size_t>(slot)]) {
        account();
        pending_->halves[static_cast<std::size_t>(slot)] = std::move(batch);
        if (pending_->halves[0] && pending_->halves[1]) flush_into(out);
      } else {
        ++c_.duplicates;
      }
      return out;
    }
    if (delta >= 0x8000) {
      ++c_.late;
      return out;
    }
    c_.losses += delta - 1u;
    flush_into(out);
  }
  account();
  last_seq_ = pkt.seq;
  ++c_.units;
  if (pkt.type == codec::PacketType::single) {
    emit(std::move(batch), out);
  } else {
    pending_ = Pending{pkt.seq, {}};
    pending_->halves[static_cast<std::size_t>(pkt.type) - 1] = std::move(batch);
  }
  return out;
}

std::optional<double> StreamAssembler::samples_per_s() const {
  if (recv_bytes_ == first_bytes_ || last_recv_ <= first_recv_) return std::nullopt;
  return static_cast<double>(recv_samples_ - first_samples_) / (static_cast<double>(last_recv_ - first_recv_) * 1e-9);
}

std::optional<double> StreamAssembler::bytes_per_s() const {
  if (recv_bytes_ == first_bytes_ || last_recv_ <= first_recv_) return std::nullopt;
  return static_cast<double>(recv_bytes_ - first_bytes_) / (static_cast<double>(last_recv_ - first_recv_) * 1e-9);
}

// ---- reports ---------------------------------------------------------------------------

namespace {

void accumulate(Counters& into, const Counters& c) {
  into.datagrams += c.datagrams;
  into.packets += c.packets;
  into.bytes += c.bytes;
  into.samples += c.samples;
  into.units += c.units;
  into.losses += c.losses;
  into.decode_errors += c.decode_errors;
  into.duplicates += c.duplicates;
  into.late += c.late;
  into.out_of_order += c.out_of_order;
  into.split_pairs += c.split_pairs;
  into.split_partial += c.split_partial;
  for (std::size_t i = 0; i < into.by_encoding.size(); ++i) {
    into.by_encoding[i].packets += c.by_encoding[i].packets;
    into.by_encoding[i].bytes += c.by_encoding[i].bytes;
    into.by_encoding[i].samples += c.by_encoding[i].samples;
  }
}

double loss_rate(const Counters& c) {
  const auto expected = c.units + c.losses;
  return expected == 0 ? 0.0 : static_cast<double>(c.losses) / static_cast<double>(expected);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const Counters& c) {
  nlohmann::json j = {
      {"datagrams", c.datagrams},       {"packets", c.packets},
      {"bytes", c.bytes},               {"samples", c.samples},
      {"units", c.units},               {"losses", c.losses},
      {"decode_errors", c.decode_errors}, {"duplicates", c.duplicates},
      {"late", c.late},                 {"out_of_order", c.out_of_order},
      {"split_pairs", c.split_pairs},   {"split_partial", c.split_partial},
  };
  auto& by = j["by_encoding"] = nlohmann::json::object();
  for (auto e : codec::kAllEncodings) {
    const auto& s = c.by_encoding[static_cast<std::size_t>(e)];
    if (s.packets == 0) continue;
    by[std::string(codec::to_string(e))] = {{"packets", s.packets}, {"bytes", s.bytes}, {"samples", s.samples}};
  }
  return j;
}

nlohmann::json to_json(const Report& r) {
  nlohmann::json j;
  j["samples_per_s"] = optional_json(r.samples_per_s);
  j["bytes_per_s"] = optional_json(r.bytes_per_s);
  j["loss_rate"] = r.loss_rate;
  j["total"] = to_json(r.total);
  auto& src = j["sources"] = nlohmann::json::array();
  for (const auto& s : r.sources)
    src.push_back({{"name", s.name},
                   {"samples_per_s", optional_json(s.samples_per_s)},
                   {"bytes_per_s", optional_json(s.bytes_per_s)},
                   {"loss_rate", s.loss_rate},
                   {"counters", to_json(s.counters)}});
  return j;
}

// ---- Ingestor ---------------------------------------------------------------------------

void Ingestor::ingest(std::uint32_t source, std::span<const std::uint8_t> bytes, std::uint64_t recv_time_ns,
                      const std::string& name) {
  std::lock_guard lock(mu_);
  auto it = sources_.find(source);
  if (it == sources_.end())
    it = sources_.emplace(source, Source{name.empty() ? "src" + std::to_string(source) : name,
                                         StreamAssembler(headerless_)}).first;
  auto batches = it->second.assembler.ingest(bytes, recv_time_ns);
  if (sink_)
    for (const auto& b : batches) sink_(source, it->second.name, b);
}

void Ingestor::flush() {
  std::lock_guard lock(mu_);
  for (auto& [id, src] : sources_) {
    auto batches = src.assembler.flush();
    if (sink_)
      for (const auto& b : batches) sink_(id, src.name, b);
  }
}

Report Ingestor::report() const {
  std::lock_guard lock(mu_);
  Report r;
  for (const auto& [id, src] : sources_) {
    SourceReport s;
    s.name = src.name;
    s.counters = src.assembler.counters();
    s.samples_per_s = src.assembler.samples_per_s();
    s.bytes_per_s = src.assembler.bytes_per_s();
    s.loss_rate = loss_rate(s.counters);
    accumulate(r.total, s.counters);
    if (s.samples_per_s) r.samples_per_s = r.samples_per_s.value_or(0) + *s.samples_per_s;
    if (s.bytes_per_s) r.bytes_per_s = r.bytes_per_s.value_or(0) + *s.bytes_per_s;
    r.sources.push_back(std::move(s));
  }
  r.loss_rate = loss_rate(r.total);
  return r;
}

Report ingest_capture(const std::vector<CapturedPacket>& packets, std::optional<Encoding> headerless,
                      const Ingestor::Sink& sink) {
  Ingestor ing(headerless, sink);
  for (const auto& p : packets) ing.ingest(p.source_id, p.bytes, p.recv_time_ns);
  ing.flush();
  return ing.report();
}

// ---- RecordWriter -----------------------------------------------------------------------------

RecordWriter::RecordWriter(std::filesystem::path dir, RecordFormat format, std::uint64_t rotate_bytes)
    : dir_(std::move(dir)), format_(format), rotate_bytes_(rotate_bytes) {
  std::filesystem::create_directories(dir_);
}

void RecordWriter::open(File& f) {
  const auto ext = format_ == RecordFormat::raw ? ".raw" : ".csv";
  const auto path = dir_ / (f.stem + (f.index ? "." + std::to_string(f.index) : std::string()) + ext);
  f.out.close();
  f.out.open(path, std::ios::binary | std::ios::app);
  if (!f.out) throw std::runtime_error("cannot open " + path.string());
  f.size = std::filesystem::exists(path) ? std::filesystem::file_size(path) : 0;
  if (format_ == RecordFormat::csv && f.size == 0) {
    f.out << "timestamp_ns,sample\n";
    f.size += 19;
  }
  created_.push_back(path);
}

void RecordWriter::write(std::uint32_t source, const std::string& name, const SampleBatch& batch) {
  auto [it, inserted] = files_.try_emplace(source);
  auto& f = it->second;
  if (inserted) {
    f.stem = name.empty() ? "src" + std::to_string(source) : name;
    for (auto& ch : f.stem)
      if (ch == ':' || ch == '/') ch = '_';
    open(f);
  }
  std::vector<std::uint8_t> raw;
  std::string text;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (format_ == RecordFormat::raw) {
      put_le(raw, batch.timestamps[i], 8);
      put_le(raw, batch.samples[i], 2);
    } else {
      text += std::to_string(batch.timestamps[i]) + ',' + std::to_string(batch.samples[i]) + '\n';
    }
  }
  if (format_ == RecordFormat::raw) {
    f.out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    f.size += raw.size();
  } else {
    f.out << text;
    f.size += text.size();
  }
  f.out.flush();
  if (rotate_bytes_ > 0 && f.size >= rotate_bytes_) {
    ++f.index;
    open(f);
  }
}

std::vector<std::filesystem::path> RecordWriter::files() const { return created_; }

// ---- UDP ------------------------------------------------------------------------------------

namespace {

sockaddr_in resolve(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected host:port, got '" + hostport + "'");
  const auto host = hostport.substr(0, colon);
  const auto port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (const int rc = getaddrinfo(host.empty() ? "0.0.0.0" : host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw std::runtime_error("cannot resolve '" + hostport + "': " + gai_strerror(rc));
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  freeaddrinfo(res);
  return addr;
}

[[noreturn]] void sys_fail(const std::string& what) { throw std::runtime_error(what + ": " + std::strerror(errno)); }

}  // namespace

UdpServer::UdpServer(const std::string& listen) {
  const auto addr = resolve(listen);
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int rcvbuf = 8 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd_);
    sys_fail("bind " + listen);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

UdpServer::~UdpServer() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t UdpServer::serve(Ingestor& ingestor, const std::atomic<bool>& stop,
                               std::optional<std::uint64_t> max_datagrams) {
  std::vector<std::uint8_t> buf(65536);
  std::uint64_t received = 0;
  pollfd pfd{fd_, POLLIN, 0};
  while (!stop.load(std::memory_order_relaxed) && (!max_datagrams || received < *max_datagrams)) {
    const int ready = ::poll(&pfd, 1, 50);
    if (ready < 0) {
      if (errno == EINTR) continue;
      sys_fail("poll");
    }
    if (ready == 0) continue;
    sockaddr_in from{};
    socklen_t len = sizeof(from);
    const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    const auto now = monotonic_ns();
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      sys_fail("recvfrom");
    }
    char host[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &from.sin_addr, host, sizeof(host));
    const std::string name = std::string(host) + ":" + std::to_string(ntohs(from.sin_port));
    const auto [it, inserted] = ids_.try_emplace(name, static_cast<std::uint32_t>(ids_.size()));
    ingestor.ingest(it->second, std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)), now, name);
    ++received;
  }
  return received;
}

void udp_replay(const std::string& target, const std::vector<CapturedPacket>& packets, bool paced) {
  const auto addr = resolve(target);
  std::map<std::uint16_t, int> sockets;
  auto socket_for = [&](std::uint16_t source) {
    auto it = sockets.find(source);
    if (it != sockets.end()) return it->second;
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) sys_fail("socket");
    sockets[source] = fd;
    return fd;
  };
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t t0 = packets.empty() ? 0 : packets.front().recv_time_ns;
  try {
    for (const auto& p : packets) {
      if (paced) std::this_thread::sleep_until(start + std::chrono::nanoseconds(p.recv_time_ns - t0));
      const int fd = socket_for(p.source_id);
      if (::sendto(fd, p.bytes.data(), p.bytes.size(), 0, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0)
        sys_fail("sendto");
    }
  } catch (...) {
    for (auto& [id, fd] : sockets) ::close(fd);
    throw;
  }
  for (auto& [id, fd] : sockets) ::close(fd);
}

}  // namespace wsense::ingest
