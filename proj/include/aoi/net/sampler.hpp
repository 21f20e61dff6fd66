#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aoi/age/stats.hpp"
#include "aoi/age/trace.hpp"
#include "aoi/net/emulated.hpp"

namespace aoi::net {

struct RateSegment {
  double rate_hz = 0.0;
  Nanos duration{0};
};

using RateSchedule = std::vector<RateSegment>;

inline void check_schedule(const RateSchedule& s) {
  if (s.empty()) throw ConfigError("rate schedule is empty");
  for (const auto& seg : s) {
    if (!(seg.rate_hz >= 0.0) || !std::isfinite(seg.rate_hz)) throw ConfigError("rate must be finite and non-negative");
    if (seg.duration.count() <= 0) throw ConfigError("segment duration must be positive");
  }
}

inline Nanos schedule_length(const RateSchedule& s) {
  Nanos total{0};
  for (const auto& seg : s) total += seg.duration;
  return total;
}

/// "140:30s" or "10:5s,100:5s,300:5s".
inline RateSchedule parse_schedule(std::string_view text) {
  RateSchedule out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = text.substr(pos, comma - pos);
    pos = comma + 1;
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw ConfigError("schedule segment must be RATE:DURATION");
    out.push_back({detail::parse_number(item.substr(0, colon), "rate"), parse_duration(item.substr(colon + 1))});
  }
  check_schedule(out);
  return out;
}

/// Linear sweep from `lo` to `hi` Hz in `steps` equal segments of `each`.
inline RateSchedule linear_sweep_schedule(double lo, double hi, std::size_t steps, Nanos each) {
  if (steps == 0) throw ConfigError("sweep needs at least one step");
  RateSchedule s;
  for (std::size_t i = 0; i < steps; ++i) {
    const double r = steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    s.push_back({r, each});
  }
  check_schedule(s);
  return s;
}

/// Send instants relative to the schedule start, periodic within a segment.
inline std::vector<Nanos> send_times(const RateSchedule& schedule) {
  check_schedule(schedule);
  std::vector<Nanos> out;
  Nanos seg_start{0};
  for (const auto& seg : schedule) {
    const Nanos seg_end = seg_start + seg.duration;
    if (seg.rate_hz > 0.0) {
      const double period = 1.0 / seg.rate_hz;
      for (std::uint64_t k = 0;; ++k) {
        const Nanos t = seg_start + from_seconds(period * static_cast<double>(k));
        if (t >= seg_end) break;
        out.push_back(t);
      }
    }
    seg_start = seg_end;
  }
  return out;
}

/// Collects echo replies by id. The first reply per id counts; repeats and
/// replies to unknown ids are tallied and dropped.
class ReplyMatcher {
 public:
  void sent(std::uint64_t id, Nanos gen, std::uint32_t size) {
    index_.emplace(id, records_.size());
    records_.push_back({id, gen, std::nullopt, size});
  }

  void received(std::uint64_t id, std::uint64_t gen_ns, Nanos at) {
    auto it = index_.find(id);
    if (it == index_.end() || records_[it->second].gen_ts.count() != static_cast<std::int64_t>(gen_ns)) {
      ++unmatched_;
      return;
    }
    auto& rec = records_[it->second];
    if (rec.recv_ts) {
      ++duplicates_;
      return;
    }
    rec.recv_ts = at;
  }

  const std::vector<PacketRecord>& records() const { return records_; }
  std::uint64_t unmatched() const { return unmatched_; }
  std::uint64_t duplicates() const { return duplicates_; }

 private:
  std::vector<PacketRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::uint64_t unmatched_ = 0;
  std::uint64_t duplicates_ = 0;
};

struct SampleRun {
  AgeTrace trace;  // generation and echo-reply stamps, both on the sender clock
  AgeTrace truth;  // generation and arrival at the remote end, on the sender clock
  std::uint64_t sent = 0;
  std::uint64_t echoed = 0;
  std::uint64_t unmatched = 0;
  std::uint64_t duplicates = 0;
};

/// Runs the schedule over an emulated echo path, starting at `start`, and
/// waits `grace` after the last send for stragglers.
inline SampleRun sample_emulated(EmulatedEchoPath& path, const RateSchedule& schedule,
                                 std::size_t datagram_bytes = kDefaultDatagramBytes,
                                 Nanos start = Nanos{0}, Nanos grace = from_seconds(2.0)) {
  ReplyMatcher matcher;
  std::uint64_t id = 0;
  auto absorb = [&](const std::vector<EmulatedEchoPath::Reply>& replies) {
    for (const auto& r : replies)
      if (r.packet.type == MsgType::echo_reply) matcher.received(r.packet.id, r.packet.gen_ts, r.at);
  };
  for (Nanos offset : send_times(schedule)) {
    const Nanos t = start + offset;
    absorb(path.run_until(t - Nanos{1}));
    auto pkt = WirePacket::sized(MsgType::data, id, static_cast<std::uint64_t>(t.count()), datagram_bytes);
    matcher.sent(id, t, static_cast<std::uint32_t>(datagram_bytes));
    path.send(t, pkt);
    ++id;
  }
  absorb(path.run_until(start + schedule_length(schedule) + grace));

  SampleRun run;
  run.trace = AgeTrace::from_records(matcher.records());
  std::vector<PacketRecord> truth = matcher.records();
  for (auto& r : truth) r.recv_ts = path.remote_arrival(r.id);
  run.truth = AgeTrace::from_records(std::move(truth));
  run.truth.t_end = std::max(run.truth.t_end, run.trace.t_end);
  run.sent = id;
  run.echoed = delivered_count(run.trace);
  run.unmatched = matcher.unmatched();
  run.duplicates = matcher.duplicates();
  return run;
}

/// Age estimate that treats each echo reply as the delivery instant. Since a
/// reply never precedes the arrival it acknowledges, this bounds the true age
/// from above on the same window.
inline Seconds rtt_age_bound(const AgeTrace& ack_trace) { return average_age_h(ack_trace); }

/// True average age over the window the RTT-based estimate covers.
inline Seconds true_age_on_ack_window(const AgeTrace& truth, const AgeTrace& ack_trace) {
  const auto acks = effective_deliveries(ack_trace);
  if (acks.size() < 2) throw InsufficientData("need two acknowledged packets");
  return window_average_age(truth, acks.front().recv, acks.back().recv);
}

}  // namespace aoi::net
