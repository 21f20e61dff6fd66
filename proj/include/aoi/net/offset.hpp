#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aoi/detail/sum.hpp"
#include "aoi/net/emulated.hpp"

namespace aoi::net {

struct OffsetEstimate {
  std::int64_t offset_ns = 0;
  std::vector<double> rtt_samples;  // seconds
  double confidence = 0.0;          // sample standard deviation of per-ping offsets, seconds
};

struct SyncOptions {
  std::size_t pings = 100;
  std::size_t min_pings = 10;
  Nanos timeout{from_seconds(1.0)};
  unsigned retries = 3;
  Nanos spacing{from_seconds(0.01)};

  void check() const {
    if (pings < min_pings) throw ConfigError("offset estimation needs at least " + std::to_string(min_pings) + " pings");
    if (timeout.count() <= 0) throw ConfigError("ping timeout must be positive");
  }
};

/// Per-ping offset = server stamp minus the local midpoint of the exchange.
class OffsetAccumulator {
 public:
  void add(Nanos t_send, Nanos t_recv, std::int64_t server_ns) {
    const Nanos rtt = t_recv - t_send;
    const double mid = static_cast<double>(t_send.count()) + static_cast<double>(rtt.count()) / 2.0;
    samples_.push_back((static_cast<double>(server_ns) - mid) * 1e-9);
    rtts_.push_back(to_seconds(rtt));
  }

  std::size_t size() const { return samples_.size(); }

  OffsetEstimate finish(std::size_t min_pings) const {
    if (samples_.size() < min_pings)
      throw NetworkError("only " + std::to_string(samples_.size()) + " ping exchanges completed");
    aoi::detail::CompensatedSum s;
    for (double x : samples_) s += x;
    const double mean = s.value() / static_cast<double>(samples_.size());
    aoi::detail::CompensatedSum sq;
    for (double x : samples_) sq += (x - mean) * (x - mean);
    OffsetEstimate e;
    e.offset_ns = std::llround(mean * 1e9);
    e.rtt_samples = rtts_;
    e.confidence = samples_.size() > 1 ? std::sqrt(sq.value() / static_cast<double>(samples_.size() - 1)) : 0.0;
    return e;
  }

 private:
  std::vector<double> samples_;
  std::vector<double> rtts_;
};

/// Sequential time-request exchanges over an emulated path, in virtual time.
inline OffsetEstimate estimate_offset(EmulatedEchoPath& path, const SyncOptions& opt = {},
                                      Nanos start = from_seconds(1.0)) {
  opt.check();
  OffsetAccumulator acc;
  Nanos now = start;
  std::uint64_t id = 0;
  for (std::size_t ping = 0; ping < opt.pings; ++ping) {
    bool answered = false;
    for (unsigned attempt = 0; attempt <= opt.retries && !answered; ++attempt) {
      const std::uint64_t this_id = id++;
      WirePacket req{MsgType::time_request, this_id, static_cast<std::uint64_t>(now.count()), 0, 0};
      const Nanos sent = now;
      path.send(sent, req);
      const Nanos deadline = sent + opt.timeout;
      while (auto t = path.next_event()) {
        if (*t > deadline) break;
        auto r = path.step();
        if (r && r->packet.type == MsgType::time_response && r->packet.id == this_id) {
          acc.add(sent, r->at, static_cast<std::int64_t>(r->packet.extra_ts));
          now = std::max(r->at, sent + opt.spacing);
          answered = true;
          break;
        }
      }
      if (!answered) now = deadline;
    }
    if (!answered) throw NetworkError("time request unanswered after retries");
  }
  return acc.finish(opt.min_pings);
}

}  // namespace aoi::net
