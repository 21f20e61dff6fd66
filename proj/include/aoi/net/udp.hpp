#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <stop_token>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "aoi/net/echo.hpp"
#include "aoi/net/offset.hpp"
#include "aoi/net/sampler.hpp"

namespace aoi::net {

inline std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

inline sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) throw NetworkError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

class UdpSocket {
 public:
  UdpSocket() : fd_{::socket(AF_INET, SOCK_DGRAM, 0)} {
    if (fd_ < 0) throw NetworkError(errno_text("socket"));
  }
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  UdpSocket(UdpSocket&& o) noexcept : fd_{std::exchange(o.fd_, -1)} {}
  UdpSocket& operator=(UdpSocket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~UdpSocket() { close(); }

  void bind(const std::string& host, std::uint16_t port) {
    const sockaddr_in addr = resolve_ipv4(host, port);
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0)
      throw NetworkError(errno_text(("bind " + host + ":" + std::to_string(port)).c_str()));
  }

  std::uint16_t local_port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw NetworkError(errno_text("getsockname"));
    return ntohs(addr.sin_port);
  }

  void send_to(std::span<const std::uint8_t> bytes, const sockaddr_in& to) {
    const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof(to));
    if (n < 0 || static_cast<std::size_t>(n) != bytes.size()) throw NetworkError(errno_text("sendto"));
  }

  struct Datagram {
    std::size_t size;
    sockaddr_in from;
  };

  /// Waits up to `timeout` for one datagram.
  std::optional<Datagram> recv(std::span<std::uint8_t> buf, std::chrono::milliseconds timeout) {
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready < 0) {
      if (errno == EINTR) return std::nullopt;
      throw NetworkError(errno_text("poll"));
    }
    if (ready == 0) return std::nullopt;
    sockaddr_in from{};
    socklen_t len = sizeof(from);
    const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) return std::nullopt;
      throw NetworkError(errno_text("recvfrom"));
    }
    return Datagram{static_cast<std::size_t>(n), from};
  }

  int fd() const { return fd_; }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_;
};

inline std::uint64_t wall_clock_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<Nanos>(std::chrono::system_clock::now().time_since_epoch()).count());
}

/// UDP echo server on its own thread. Counters are printed to `stats` once a
/// second when a stream is given.
class EchoServer {
 public:
  EchoServer(const std::string& host, std::uint16_t port) { socket_.bind(host, port); }

  std::uint16_t port() const { return socket_.local_port(); }

  void start(std::ostream* stats = nullptr) {
    worker_ = std::jthread([this, stats](std::stop_token st) { loop(st, stats); });
  }

  void stop() {
    worker_.request_stop();
    if (worker_.joinable()) worker_.join();
  }

  EchoCounters counters() const {
    std::lock_guard lock{mu_};
    return snapshot_;
  }

  ~EchoServer() { stop(); }

 private:
  void loop(std::stop_token st, std::ostream* stats) {
    std::vector<std::uint8_t> buf(kMaxDatagramBytes);
    auto next_report = std::chrono::steady_clock::now() + std::chrono::seconds(1);
    while (!st.stop_requested()) {
      if (auto d = socket_.recv(buf, std::chrono::milliseconds(100))) {
        auto reply = responder_.handle(std::span{buf.data(), d->size}, wall_clock_ns());
        if (reply) {
          try {
            socket_.send_to(*reply, d->from);
          } catch (const NetworkError&) {
          }
        }
        std::lock_guard lock{mu_};
        snapshot_ = responder_.counters();
      }
      if (stats && std::chrono::steady_clock::now() >= next_report) {
        *stats << format_counters(counters()) << std::endl;
        next_report += std::chrono::seconds(1);
      }
    }
  }

  UdpSocket socket_;
  EchoResponder responder_;
  mutable std::mutex mu_;
  EchoCounters snapshot_;
  std::jthread worker_;
};

struct UdpSampleRun {
  AgeTrace trace;
  std::uint64_t sent = 0;
  std::uint64_t echoed = 0;
  std::uint64_t unmatched = 0;
  std::uint64_t duplicates = 0;
  std::optional<std::string> error;  // set when a socket error cut the run short
};

/// Sends data packets per schedule and records echo replies. Sending and
/// receiving run on separate threads; both append to one locked sink. All
/// stamps are steady-clock nanoseconds since the run started.
inline UdpSampleRun run_udp_sampler(const std::string& host, std::uint16_t port, const RateSchedule& schedule,
                                    std::size_t datagram_bytes = kDefaultDatagramBytes,
                                    Nanos grace = from_seconds(1.0)) {
  const auto dest = resolve_ipv4(host, port);
  const auto times = send_times(schedule);
  WirePacket::sized(MsgType::data, 0, 0, datagram_bytes);  // validates the size
  UdpSocket sock;
  std::mutex mu;
  ReplyMatcher sink;
  std::optional<std::string> error;
  std::atomic<bool> sending_done{false};
  const auto origin = std::chrono::steady_clock::now();
  auto since_origin = [&] { return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now() - origin); };

  std::jthread receiver([&](std::stop_token st) {
    std::vector<std::uint8_t> buf(kMaxDatagramBytes);
    std::optional<std::chrono::steady_clock::time_point> deadline;
    while (!st.stop_requested()) {
      if (sending_done && !deadline) deadline = std::chrono::steady_clock::now() + grace;
      if (deadline && std::chrono::steady_clock::now() >= *deadline) break;
      std::optional<UdpSocket::Datagram> d;
      try {
        d = sock.recv(buf, std::chrono::milliseconds(20));
      } catch (const NetworkError& e) {
        std::lock_guard lock{mu};
        if (!error) error = e.what();
        break;
      }
      if (!d) continue;
      const Nanos at = since_origin();
      auto pkt = decode(std::span{buf.data(), d->size});
      std::lock_guard lock{mu};
      if (pkt && pkt->type == MsgType::echo_reply) sink.received(pkt->id, pkt->gen_ts, at);
      else sink.received(~std::uint64_t{0}, 0, at);
    }
  });

  std::uint64_t id = 0;
  std::vector<std::uint8_t> out(datagram_bytes);
  for (Nanos t : times) {
    std::this_thread::sleep_until(origin + t);
    const Nanos gen = since_origin();
    encode_into(WirePacket::sized(MsgType::data, id, static_cast<std::uint64_t>(gen.count()), datagram_bytes), out);
    {
      std::lock_guard lock{mu};
      sink.sent(id, gen, static_cast<std::uint32_t>(datagram_bytes));
    }
    ++id;
    try {
      sock.send_to(out, dest);
    } catch (const NetworkError& e) {
      std::lock_guard lock{mu};
      if (!error) error = e.what();
      break;
    }
  }
  sending_done = true;
  receiver.join();

  UdpSampleRun run;
  run.trace = AgeTrace::from_records(sink.records());
  run.sent = id;
  run.echoed = delivered_count(run.trace);
  run.unmatched = sink.unmatched();
  run.duplicates = sink.duplicates();
  run.error = error;
  return run;
}

/// Time-request exchanges against a live echo server. Local stamps come from
/// the wall clock, like the server's.
inline OffsetEstimate estimate_offset(const std::string& host, std::uint16_t port, const SyncOptions& opt = {}) {
  opt.check();
  const auto dest = resolve_ipv4(host, port);
  UdpSocket sock;
  OffsetAccumulator acc;
  std::vector<std::uint8_t> buf(kMaxDatagramBytes);
  std::uint64_t id = 0;
  auto now_ns = [] { return Nanos{static_cast<std::int64_t>(wall_clock_ns())}; };
  for (std::size_t ping = 0; ping < opt.pings; ++ping) {
    bool answered = false;
    for (unsigned attempt = 0; attempt <= opt.retries && !answered; ++attempt) {
      const std::uint64_t this_id = id++;
      const Nanos sent = now_ns();
      sock.send_to(encode(WirePacket{MsgType::time_request, this_id, static_cast<std::uint64_t>(sent.count()), 0, 0}),
                   dest);
      const auto deadline = std::chrono::steady_clock::now() + opt.timeout;
      while (!answered && std::chrono::steady_clock::now() < deadline) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        auto d = sock.recv(buf, std::max(left, std::chrono::milliseconds(1)));
        if (!d) continue;
        const Nanos at = now_ns();
        auto pkt = decode(std::span{buf.data(), d->size});
        if (pkt && pkt->type == MsgType::time_response && pkt->id == this_id) {
          acc.add(sent, at, static_cast<std::int64_t>(pkt->extra_ts));
          answered = true;
        }
      }
    }
    if (!answered) throw NetworkError("time request unanswered after retries");
    std::this_thread::sleep_for(opt.spacing);
  }
  return acc.finish(opt.min_pings);
}

}  // namespace aoi::net
