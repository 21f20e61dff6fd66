#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aoi/net/emulated.hpp"
#include "aoi/policy/acp.hpp"
#include "aoi/policy/config.hpp"
#include "aoi/policy/rate_policies.hpp"

namespace aoi::net {

enum class LoopPolicy { fixed_rate, zero_wait, lazy, acp };

inline LoopPolicy parse_loop_policy(std::string_view s) {
  if (s == "fixed" || s == "fixed-rate") return LoopPolicy::fixed_rate;
  if (s == "zero-wait" || s == "zw") return LoopPolicy::zero_wait;
  if (s == "lazy") return LoopPolicy::lazy;
  if (s == "acp") return LoopPolicy::acp;
  throw ConfigError("unknown policy: " + std::string(s));
}

inline std::string_view to_string(LoopPolicy p) {
  switch (p) {
    case LoopPolicy::fixed_rate: return "fixed";
    case LoopPolicy::zero_wait: return "zero-wait";
    case LoopPolicy::lazy: return "lazy";
    case LoopPolicy::acp: return "acp";
  }
  return "?";
}

struct LoopConfig {
  LoopPolicy policy = LoopPolicy::lazy;
  double fixed_rate_hz = 10.0;
  Nanos duration{from_seconds(60.0)};
  Nanos warmup{from_seconds(5.0)};
  std::size_t datagram_bytes = kDefaultDatagramBytes;
  policy::AcpConfig acp;
  double ewma_alpha = 0.125;
  Nanos min_loss_timeout{from_seconds(1.0)};

  void check() const {
    if (duration.count() <= 0) throw ConfigError("duration must be positive");
    if (warmup.count() < 0 || warmup >= duration) throw ConfigError("warmup must lie in [0, duration)");
    if (policy == LoopPolicy::fixed_rate && !(fixed_rate_hz > 0.0)) throw ConfigError("fixed rate must be positive");
    acp.check();
  }
};

struct RateSample {
  Nanos at;
  double rate_hz;
};

struct LoopRun {
  AgeTrace trace;  // generation and ACK stamps
  AgeTrace truth;  // generation and arrival at the monitor
  std::vector<policy::DecisionRecord> decisions;
  std::vector<RateSample> rates;  // one per epoch
  double mean_in_flight = 0.0;    // time average after warmup
  double mean_rate_hz = 0.0;      // sends per second after warmup
  std::uint64_t sent = 0;
  std::uint64_t acked = 0;
  std::uint64_t expired = 0;
};

/// Drives a rate policy over an emulated echo path in virtual time. The
/// monitor is the remote end; the sender only sees ACKs (echo replies) and
/// estimates the age as time since the newest acknowledged generation.
class ClosedLoop {
 public:
  ClosedLoop(EmulatedEchoPath& path, LoopConfig cfg)
      : path_{path}, cfg_{cfg}, rtt_{cfg.ewma_alpha}, inter_ack_{cfg.ewma_alpha},
        acp_{policy::AcpState::from(cfg.acp)} {
    cfg_.check();
  }

  LoopRun run() {
    next_send_ = Nanos{0};
    while (true) {
      const Nanos t = next_time();
      if (t >= cfg_.duration) {
        advance(cfg_.duration);
        break;
      }
      advance(t);
      if (auto c = path_.next_event(); c && *c == t) {
        if (auto reply = path_.step()) on_reply(*reply);
      } else if (epoch_end_ && *epoch_end_ == t) {
        end_epoch();
      } else if (next_send_ && *next_send_ == t) {
        send();
      } else {
        expire_oldest();
      }
    }
    // Let in-flight packets land so the trace sees their fate.
    for (const auto& r : path_.run_until(cfg_.duration + from_seconds(5.0))) on_reply(r, false);
    return finish();
  }

 private:
  Nanos next_time() const {
    Nanos t = Nanos::max();
    if (auto c = path_.next_event()) t = std::min(t, *c);
    if (epoch_end_) t = std::min(t, *epoch_end_);
    if (next_send_) t = std::min(t, *next_send_);
    if (!in_flight_.empty()) t = std::min(t, in_flight_.begin()->second + loss_timeout());
    return t;
  }

  Nanos loss_timeout() const {
    const Nanos rtt_based = rtt_.ready() ? from_seconds(4.0 * rtt_.value()) : Nanos{0};
    return std::max(cfg_.min_loss_timeout, rtt_based);
  }

  // Integrates backlog and the sender-side age estimate up to t.
  void advance(Nanos t) {
    if (t <= clock_) return;
    const double dt = to_seconds(t - clock_);
    const double backlog = static_cast<double>(in_flight_.size());
    epoch_backlog_area_ += backlog * dt;
    if (latest_gen_) {
      const double a0 = to_seconds(clock_ - *latest_gen_);
      epoch_age_area_ += (2.0 * a0 + dt) * dt / 2.0;
    }
    if (t > cfg_.warmup) {
      const Nanos from = std::max(clock_, cfg_.warmup);
      steady_backlog_area_ += backlog * to_seconds(t - from);
    }
    clock_ = t;
  }

  void send() {
    const Nanos t = *next_send_;
    const std::uint64_t id = next_id_++;
    records_.push_back({id, t, std::nullopt, static_cast<std::uint32_t>(cfg_.datagram_bytes)});
    in_flight_.emplace(id, t);
    path_.send(t, WirePacket::sized(MsgType::data, id, static_cast<std::uint64_t>(t.count()), cfg_.datagram_bytes));
    if (t >= cfg_.warmup) ++steady_sends_;
    schedule_next_send(t);
  }

  void schedule_next_send(Nanos last) {
    next_send_.reset();
    switch (cfg_.policy) {
      case LoopPolicy::fixed_rate:
        next_send_ = last + from_seconds(1.0 / cfg_.fixed_rate_hz);
        break;
      case LoopPolicy::zero_wait: {
        policy::PolicyObservation obs;
        obs.backlog = static_cast<double>(in_flight_.size());
        if (policy::zero_wait_next(obs)) next_send_ = clock_;
        break;
      }
      case LoopPolicy::lazy:
      case LoopPolicy::acp:
        if (rate_hz_ > 0.0) next_send_ = last + from_seconds(1.0 / rate_hz_);
        else if (in_flight_.empty()) next_send_ = clock_;  // bootstrap: one probe at a time
        break;
    }
  }

  void on_reply(const EmulatedEchoPath::Reply& r, bool live = true) {
    if (r.packet.type != MsgType::echo_reply || r.packet.id >= records_.size()) return;
    auto& rec = records_[r.packet.id];
    if (rec.recv_ts) return;
    rec.recv_ts = r.at;
    if (!live) return;
    ++epoch_acks_;
    const double rtt = to_seconds(r.at - rec.gen_ts);
    obs_.last_ack_rtt_s = rtt;
    rtt_.update(rtt);
    if (last_ack_) inter_ack_.update(to_seconds(r.at - *last_ack_));
    last_ack_ = r.at;
    in_flight_.erase(r.packet.id);
    if (!latest_gen_ || rec.gen_ts > *latest_gen_) latest_gen_ = rec.gen_ts;

    const bool bootstrapping = rate_hz_ == 0.0;
    if (cfg_.policy == LoopPolicy::lazy) rate_hz_ = policy::lazy_rate(observation());
    if (cfg_.policy == LoopPolicy::acp && bootstrapping) rate_hz_ = acp_.target_backlog / rtt_.value();
    if (!epoch_end_) start_epoch();
    if (cfg_.policy == LoopPolicy::zero_wait || bootstrapping) schedule_next_send(r.at);
  }

  void expire_oldest() {
    in_flight_.erase(in_flight_.begin());
    ++expired_;
    if (cfg_.policy == LoopPolicy::zero_wait || rate_hz_ == 0.0) schedule_next_send(clock_);
  }

  policy::PolicyObservation observation() const {
    policy::PolicyObservation o = obs_;
    o.now = clock_;
    o.ewma_rtt_s = rtt_.value();
    o.ewma_inter_ack_s = inter_ack_.value();
    o.backlog = static_cast<double>(in_flight_.size());
    o.acks_in_epoch = epoch_acks_;
    return o;
  }

  Nanos epoch_length() const {
    return std::max(cfg_.acp.min_epoch, from_seconds(rtt_.value()));
  }

  void start_epoch() {
    epoch_start_ = clock_;
    epoch_end_ = clock_ + (cfg_.policy == LoopPolicy::acp ? acp_.epoch_len : epoch_length());
    epoch_age_area_ = 0.0;
    epoch_backlog_area_ = 0.0;
    epoch_acks_ = 0;
  }

  void end_epoch() {
    const double len = to_seconds(clock_ - epoch_start_);
    policy::PolicyObservation o = observation();
    o.avg_age_epoch_s = epoch_age_area_ / len;
    o.backlog = epoch_backlog_area_ / len;
    policy::DecisionRecord rec{epoch_index_++, std::string(to_string(cfg_.policy)), 0.0, rate_hz_,
                               o.avg_age_epoch_s, o.backlog};
    if (cfg_.policy == LoopPolicy::acp) {
      const auto d = policy::acp_epoch_update(acp_, o);
      rate_hz_ = d.rate_hz;
      rec.action = std::string(policy::to_string(d.action));
      rec.rate_hz = d.rate_hz;
      rec.target_backlog = acp_.target_backlog;
      // A slower rate takes effect right away rather than after the old gap.
      if (next_send_ && !records_.empty()) {
        const Nanos candidate = records_.back().gen_ts + from_seconds(1.0 / rate_hz_);
        next_send_ = std::max(candidate, clock_);
      }
    } else if (cfg_.policy == LoopPolicy::fixed_rate) {
      rec.rate_hz = cfg_.fixed_rate_hz;
    }
    decisions_.push_back(rec);
    rates_.push_back({clock_, rec.rate_hz});
    start_epoch();
  }

  LoopRun finish() {
    LoopRun out;
    out.trace = AgeTrace::from_records(records_);
    std::vector<PacketRecord> truth = records_;
    for (auto& r : truth) r.recv_ts = path_.remote_arrival(r.id);
    out.truth = AgeTrace::from_records(std::move(truth));
    out.truth.t_end = std::max(out.truth.t_end, out.trace.t_end);
    out.decisions = std::move(decisions_);
    out.rates = std::move(rates_);
    const double steady = to_seconds(cfg_.duration - cfg_.warmup);
    out.mean_in_flight = steady_backlog_area_ / steady;
    out.mean_rate_hz = static_cast<double>(steady_sends_) / steady;
    out.sent = next_id_;
    out.acked = delivered_count(out.trace);
    out.expired = expired_;
    return out;
  }

  EmulatedEchoPath& path_;
  LoopConfig cfg_;
  policy::Ewma rtt_;
  policy::Ewma inter_ack_;
  policy::AcpState acp_;
  policy::PolicyObservation obs_;

  Nanos clock_{0};
  std::optional<Nanos> next_send_;
  std::optional<Nanos> epoch_end_;
  Nanos epoch_start_{0};
  std::optional<Nanos> last_ack_;
  std::optional<Nanos> latest_gen_;
  double rate_hz_ = 0.0;

  std::vector<PacketRecord> records_;
  std::map<std::uint64_t, Nanos> in_flight_;
  std::uint64_t next_id_ = 0;
  std::uint64_t epoch_index_ = 0;
  std::uint64_t epoch_acks_ = 0;
  std::uint64_t steady_sends_ = 0;
  std::uint64_t expired_ = 0;
  double epoch_age_area_ = 0.0;
  double epoch_backlog_area_ = 0.0;
  double steady_backlog_area_ = 0.0;
  std::vector<policy::DecisionRecord> decisions_;
  std::vector<RateSample> rates_;
};

/// Epochs after the forward-link capacity step until the policy rate first
/// drops below the reduced capacity; nullopt when there is no step or the
/// rate never gets there.
inline std::optional<std::size_t> epochs_to_reduced_capacity(const LoopRun& run, const EmulatedSpec& spec,
                                                             std::size_t datagram_bytes = kDefaultDatagramBytes) {
  const auto& step = spec.forward.capacity_step;
  if (!step || !spec.forward.bandwidth_bps) return std::nullopt;
  const double capacity_hz = *spec.forward.bandwidth_bps * step->factor / (8.0 * static_cast<double>(datagram_bytes));
  std::size_t n = 0;
  for (const auto& s : run.rates) {
    if (s.at < step->at) continue;
    ++n;
    if (s.rate_hz < capacity_hz) return n;
  }
  return std::nullopt;
}

inline LoopRun run_closed_loop(EmulatedEchoPath& path, const LoopConfig& cfg) {
  return ClosedLoop{path, cfg}.run();
}

}  // namespace aoi::net
