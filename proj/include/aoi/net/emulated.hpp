#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aoi/net/echo.hpp"
#include "aoi/sim/event_queue.hpp"
#include "aoi/sim/rng.hpp"

namespace aoi::net {

struct DelaySpec {
  enum class Kind { fixed, uniform, lognormal };
  Kind kind = Kind::fixed;
  Nanos fixed{0};
  Nanos lo{0}, hi{0};     // uniform
  Nanos median{0};        // lognormal
  double sigma = 0.0;

  static DelaySpec constant(Nanos d) { return {Kind::fixed, d}; }
  static DelaySpec uniform_between(Nanos lo, Nanos hi) {
    DelaySpec s;
    s.kind = Kind::uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
  static DelaySpec lognormal_around(Nanos median, double sigma) {
    DelaySpec s;
    s.kind = Kind::lognormal;
    s.median = median;
    s.sigma = sigma;
    return s;
  }

  void check() const {
    switch (kind) {
      case Kind::fixed:
        if (fixed.count() < 0) throw ConfigError("delay must be non-negative");
        break;
      case Kind::uniform:
        if (lo.count() < 0 || hi < lo) throw ConfigError("uniform delay needs 0 <= lo <= hi");
        break;
      case Kind::lognormal:
        if (median.count() <= 0 || !(sigma >= 0.0)) throw ConfigError("lognormal delay needs median > 0, sigma >= 0");
        break;
    }
  }

  Nanos sample(sim::Rng& rng) const {
    switch (kind) {
      case Kind::fixed: return fixed;
      case Kind::uniform: return from_seconds(rng.uniform(to_seconds(lo), to_seconds(hi)));
      case Kind::lognormal: return from_seconds(rng.lognormal(std::log(to_seconds(median)), sigma));
    }
    return fixed;
  }

  Nanos mean() const {
    switch (kind) {
      case Kind::fixed: return fixed;
      case Kind::uniform: return (lo + hi) / 2;
      case Kind::lognormal: return from_seconds(to_seconds(median) * std::exp(sigma * sigma / 2.0));
    }
    return fixed;
  }
};

/// Loss probability that applies once the measured offered load reaches `load`.
struct LossStep {
  double load = 0.0;
  double loss = 0.0;
};

/// From `at` onwards the link bandwidth is multiplied by `factor`.
struct CapacityStep {
  Nanos at{0};
  double factor = 1.0;
};

struct LinkSpec {
  DelaySpec delay;
  std::optional<double> bandwidth_bps;
  std::optional<std::size_t> buffer;  // packets allowed to wait behind the one in service
  double loss = 0.0;
  std::vector<LossStep> loss_steps;   // needs a bandwidth to measure load against
  std::optional<CapacityStep> capacity_step;

  void check() const {
    delay.check();
    if (bandwidth_bps && !(*bandwidth_bps > 0.0)) throw ConfigError("bandwidth must be positive");
    if (!(loss >= 0.0 && loss <= 1.0)) throw ConfigError("loss must lie in [0, 1]");
    for (std::size_t i = 0; i < loss_steps.size(); ++i) {
      const auto& s = loss_steps[i];
      if (!(s.loss >= 0.0 && s.loss <= 1.0) || !(s.load >= 0.0))
        throw ConfigError("bad loss step");
      if (i > 0 && !(s.load > loss_steps[i - 1].load)) throw ConfigError("loss steps must have increasing loads");
    }
    if (!loss_steps.empty() && !bandwidth_bps) throw ConfigError("loss steps need a bandwidth");
    if (capacity_step && !(capacity_step->factor > 0.0)) throw ConfigError("capacity factor must be positive");
    if (capacity_step && !bandwidth_bps) throw ConfigError("capacity step needs a bandwidth");
  }

  std::optional<double> bandwidth_at(Nanos t) const {
    if (!bandwidth_bps) return std::nullopt;
    if (capacity_step && t >= capacity_step->at) return *bandwidth_bps * capacity_step->factor;
    return bandwidth_bps;
  }
};

/// One direction of the channel: FCFS serialization at the bandwidth cap,
/// a bounded buffer, random loss, then propagation delay.
class EmulatedLink {
 public:
  EmulatedLink(LinkSpec spec, std::uint64_t seed, std::uint64_t stream)
      : spec_{std::move(spec)}, rng_{seed, stream} {
    spec_.check();
  }

  const LinkSpec& spec() const { return spec_; }

  /// Arrival time at the far end, or nullopt when the packet is dropped.
  std::optional<Nanos> transmit(Nanos now, std::size_t bytes) {
    observe_load(now, bytes);
    while (!departures_.empty() && departures_.front() <= now) departures_.pop_front();
    if (spec_.buffer && departures_.size() > *spec_.buffer) {
      ++dropped_buffer_;
      return std::nullopt;
    }
    if (rng_.bernoulli(loss_probability())) {
      ++lost_;
      return std::nullopt;
    }
    Nanos depart = now;
    if (auto bw = spec_.bandwidth_at(now)) {
      const Nanos start = std::max(now, free_at_);
      depart = start + from_seconds(static_cast<double>(bytes) * 8.0 / *bw);
      free_at_ = depart;
      departures_.push_back(depart);
    }
    return depart + spec_.delay.sample(rng_);
  }

  double offered_load() const { return load_; }
  std::uint64_t lost() const { return lost_; }
  std::uint64_t dropped_buffer() const { return dropped_buffer_; }

 private:
  double loss_probability() const {
    double p = spec_.loss;
    for (const auto& s : spec_.loss_steps)
      if (load_ >= s.load) p = std::max(p, s.loss);
    return p;
  }

  // Offered load = bits per second sent / bandwidth, smoothed over inter-send gaps.
  void observe_load(Nanos now, std::size_t bytes) {
    const auto bw = spec_.bandwidth_at(now);
    if (!bw) return;
    if (last_send_) {
      const double gap = std::max(to_seconds(now - *last_send_), 1e-9);
      const double sample = static_cast<double>(bytes) * 8.0 / gap / *bw;
      load_ = load_ == 0.0 ? sample : 0.9 * load_ + 0.1 * sample;
    }
    last_send_ = now;
  }

  LinkSpec spec_;
  sim::Rng rng_;
  Nanos free_at_{0};
  std::deque<Nanos> departures_;
  std::optional<Nanos> last_send_;
  double load_ = 0.0;
  std::uint64_t lost_ = 0;
  std::uint64_t dropped_buffer_ = 0;
};

struct EmulatedSpec {
  LinkSpec forward;
  LinkSpec backward;
  Nanos remote_offset{0};  // remote clock minus local clock

  void check() const {
    forward.check();
    backward.check();
  }
};

enum class Side { local, remote };

/// In-process channel between a local and a remote endpoint, in virtual time.
/// Datagrams sent from one side show up at the other after the impairments of
/// the corresponding link; arrivals are handed out in time order.
class EmulatedChannel {
 public:
  struct Arrival {
    Nanos at;
    Side to;
    std::vector<std::uint8_t> bytes;
  };

  EmulatedChannel(const EmulatedSpec& spec, std::uint64_t seed)
      : offset_{spec.remote_offset}, forward_{spec.forward, seed, 11}, backward_{spec.backward, seed, 12} {}

  bool send(Side from, Nanos now, std::vector<std::uint8_t> bytes) {
    auto& link = from == Side::local ? forward_ : backward_;
    auto at = link.transmit(now, bytes.size());
    if (!at) return false;
    pending_.push(*at, Arrival{*at, from == Side::local ? Side::remote : Side::local, std::move(bytes)});
    return true;
  }

  std::optional<Nanos> next_arrival() const {
    if (pending_.empty()) return std::nullopt;
    return pending_.top().time;
  }

  Arrival pop() { return pending_.pop().payload; }

  Nanos remote_clock(Nanos local) const { return local + offset_; }
  const EmulatedLink& forward() const { return forward_; }
  const EmulatedLink& backward() const { return backward_; }

 private:
  Nanos offset_;
  EmulatedLink forward_;
  EmulatedLink backward_;
  sim::EventQueue<Arrival> pending_;
};

/// Emulated channel with an echo server on the remote side. Also remembers,
/// for ground truth, when each data packet first reached the remote end.
class EmulatedEchoPath {
 public:
  struct Reply {
    Nanos at;
    WirePacket packet;
  };

  EmulatedEchoPath(const EmulatedSpec& spec, std::uint64_t seed) : channel_{spec, seed} { spec.check(); }

  bool send(Nanos now, const WirePacket& pkt) { return channel_.send(Side::local, now, encode(pkt)); }

  std::optional<Nanos> next_event() const { return channel_.next_arrival(); }

  /// Processes the next pending arrival. Remote arrivals are answered on the
  /// spot and yield nothing; local arrivals yield the decoded reply.
  std::optional<Reply> step() {
    auto a = channel_.pop();
    if (a.to == Side::remote) {
      const Nanos remote_now = channel_.remote_clock(a.at);
      if (remote_now.count() < 0) throw RangeError("remote clock before its epoch");
      auto pkt = decode(a.bytes);
      if (pkt && pkt->type == MsgType::data) remote_arrivals_.try_emplace(pkt->id, a.at);
      if (auto reply = responder_.handle(a.bytes, static_cast<std::uint64_t>(remote_now.count())))
        channel_.send(Side::remote, a.at, std::move(*reply));
      return std::nullopt;
    }
    auto pkt = decode(a.bytes);
    if (!pkt) return std::nullopt;
    return Reply{a.at, *pkt};
  }

  /// Runs every arrival up to and including `until`; returns local replies.
  std::vector<Reply> run_until(Nanos until) {
    std::vector<Reply> out;
    while (auto t = next_event()) {
      if (*t > until) break;
      if (auto r = step()) out.push_back(*r);
    }
    return out;
  }

  std::optional<Nanos> remote_arrival(std::uint64_t id) const {
    auto it = remote_arrivals_.find(id);
    if (it == remote_arrivals_.end()) return std::nullopt;
    return it->second;
  }

  const EchoCounters& server_counters() const { return responder_.counters(); }
  const EmulatedChannel& channel() const { return channel_; }

 private:
  EmulatedChannel channel_;
  EchoResponder responder_;
  std::unordered_map<std::uint64_t, Nanos> remote_arrivals_;
};

namespace detail {

inline double parse_number(std::string_view v, std::string_view what) {
  try {
    std::size_t used = 0;
    const double x = std::stod(std::string(v), &used);
    if (used != v.size() || !std::isfinite(x)) throw ConfigError("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + std::string(what) + ": " + std::string(v));
  }
}

// "1e6", "130k", "1.5M", "2G", optional trailing "bps".
inline double parse_bandwidth(std::string_view v) {
  if (v.size() > 3 && v.substr(v.size() - 3) == "bps") v.remove_suffix(3);
  double scale = 1.0;
  if (!v.empty()) {
    switch (v.back()) {
      case 'k': case 'K': scale = 1e3; break;
      case 'M': scale = 1e6; break;
      case 'G': scale = 1e9; break;
      default: break;
    }
    if (scale != 1.0) v.remove_suffix(1);
  }
  return parse_number(v, "bandwidth") * scale;
}

}  // namespace detail

/// Comma-separated `key=value` description of an emulated echo channel:
///   fixed_rtt=D       both directions fixed at D/2
///   fixed_delay=D     forward fixed at D, instant return
///   fwd=D, bwd=D      fixed one-way delays
///   lognormal_rtt=D   lognormal one-way delays with median D/2 (see sigma)
///   sigma=S           lognormal shape, default 0.5
///   uniform_rtt=A:B   one-way delays uniform on [A/2, B/2]
///   bandwidth=R       forward bottleneck in bit/s (k, M, G suffixes)
///   buffer=N          forward FCFS buffer in packets
///   loss=P            forward loss probability
///   loss_steps=L:P/L:P  extra loss once offered load reaches L
///   offset=D          remote clock offset
///   capacity_step[=T:F] bandwidth times F from T on (default 30s:0.25, 1M)
inline EmulatedSpec parse_emulated_spec(std::string_view text) {
  EmulatedSpec spec;
  double sigma = 0.5;
  std::optional<Nanos> lognormal_rtt;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const auto key = item.substr(0, eq);
    const auto val = eq == std::string_view::npos ? std::string_view{} : item.substr(eq + 1);
    auto need = [&] {
      if (val.empty()) throw ConfigError("emulated spec key " + std::string(key) + " needs a value");
      return val;
    };
    if (key == "fixed_rtt") {
      const Nanos rtt = parse_duration(need());
      spec.forward.delay = DelaySpec::constant(rtt / 2);
      spec.backward.delay = DelaySpec::constant(rtt - rtt / 2);
    } else if (key == "fixed_delay") {
      spec.forward.delay = DelaySpec::constant(parse_duration(need()));
      spec.backward.delay = DelaySpec::constant(Nanos{0});
    } else if (key == "fwd") {
      spec.forward.delay = DelaySpec::constant(parse_duration(need()));
    } else if (key == "bwd") {
      spec.backward.delay = DelaySpec::constant(parse_duration(need()));
    } else if (key == "lognormal_rtt") {
      lognormal_rtt = parse_duration(need());
    } else if (key == "sigma") {
      sigma = detail::parse_number(need(), key);
    } else if (key == "uniform_rtt") {
      const auto v = need();
      const auto colon = v.find(':');
      if (colon == std::string_view::npos) throw ConfigError("uniform_rtt expects A:B");
      const Nanos a = parse_duration(v.substr(0, colon));
      const Nanos b = parse_duration(v.substr(colon + 1));
      spec.forward.delay = DelaySpec::uniform_between(a / 2, b / 2);
      spec.backward.delay = spec.forward.delay;
    } else if (key == "bandwidth") {
      spec.forward.bandwidth_bps = detail::parse_bandwidth(need());
    } else if (key == "buffer") {
      const double n = detail::parse_number(need(), key);
      if (n < 0 || n != std::floor(n)) throw ConfigError("buffer must be a non-negative integer");
      spec.forward.buffer = static_cast<std::size_t>(n);
    } else if (key == "loss") {
      spec.forward.loss = detail::parse_number(need(), key);
    } else if (key == "loss_steps") {
      std::string_view rest = need();
      while (!rest.empty()) {
        auto slash = rest.find('/');
        const auto step = rest.substr(0, slash);
        const auto colon = step.find(':');
        if (colon == std::string_view::npos) throw ConfigError("loss_steps expects LOAD:P/LOAD:P");
        spec.forward.loss_steps.push_back(
            {detail::parse_number(step.substr(0, colon), key), detail::parse_number(step.substr(colon + 1), key)});
        rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
      }
    } else if (key == "offset") {
      const bool neg = !val.empty() && val.front() == '-';
      const Nanos d = parse_duration(neg ? need().substr(1) : need());
      spec.remote_offset = neg ? -d : d;
    } else if (key == "capacity_step") {
      CapacityStep step{from_seconds(30.0), 0.25};
      if (!val.empty()) {
        const auto colon = val.find(':');
        if (colon == std::string_view::npos) throw ConfigError("capacity_step expects T:FACTOR");
        step.at = parse_duration(val.substr(0, colon));
        step.factor = detail::parse_number(val.substr(colon + 1), key);
      }
      spec.forward.capacity_step = step;
    } else {
      throw ConfigError("unknown emulated spec key: " + std::string(key));
    }
  }
  if (lognormal_rtt) {
    spec.forward.delay = DelaySpec::lognormal_around(*lognormal_rtt / 2, sigma);
    spec.backward.delay = spec.forward.delay;
  }
  if (spec.forward.capacity_step && !spec.forward.bandwidth_bps) {
    spec.forward.bandwidth_bps = 1e6;
    if (!spec.forward.buffer) spec.forward.buffer = 100;
  }
  spec.check();
  return spec;
}

}  // namespace aoi::net
