#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "aoi/age/trace.hpp"
#include "aoi/sim/channel_model.hpp"
#include "aoi/sim/event_queue.hpp"
#include "aoi/sim/rng.hpp"

namespace aoi::sim {

struct PoissonArrivals {
  double rate_hz = 1.0;
};

struct DeterministicArrivals {
  double rate_hz = 1.0;
};

/// What a generate-at-will source sees when the server goes idle.
struct IdleView {
  Nanos now{0};
  std::uint64_t delivered = 0;
  std::optional<Nanos> last_system_time;
};

/// The source decides how long to wait after the server goes idle before
/// generating its next update (zero for zero-wait).
struct GenerateAtWill {
  std::function<Nanos(const IdleView&)> wait_after_idle;
};

using ArrivalProcess = std::variant<PoissonArrivals, DeterministicArrivals, GenerateAtWill>;

struct ExponentialService {
  double rate_hz = 1.0;
};

struct DeterministicService {
  double rate_hz = 1.0;  // service time is 1 / rate
};

using ServiceProcess = std::variant<ExponentialService, DeterministicService>;

enum class Discipline { fcfs, lcfs1 };

inline std::string_view to_string(Discipline d) { return d == Discipline::fcfs ? "fcfs" : "lcfs1"; }

inline Discipline parse_discipline(std::string_view s) {
  if (s == "fcfs") return Discipline::fcfs;
  if (s == "lcfs1" || s == "lcfs-1") return Discipline::lcfs1;
  throw ConfigError("unknown discipline '" + std::string{s} + "'");
}

struct SimConfig {
  ArrivalProcess arrival = PoissonArrivals{0.5};
  ServiceProcess service = ExponentialService{1.0};
  Discipline discipline = Discipline::fcfs;
  std::optional<std::size_t> buffer;  // waiting slots (k - 1); empty means unbounded
  double ingress_loss = 0.0;          // i.i.d. drop before the queue
  double link_loss = 0.0;             // i.i.d. drop after service
  Nanos propagation{0};               // added to every delivery
  std::optional<ChannelModel> channel;
  std::uint64_t horizon = 1000;  // number of arrivals
  std::uint64_t seed = 1;
  bool drain = true;  // keep serving after the last arrival
  std::uint32_t packet_bytes = 0;
};

inline std::optional<double> arrival_rate(const ArrivalProcess& a) {
  if (auto* p = std::get_if<PoissonArrivals>(&a)) return p->rate_hz;
  if (auto* d = std::get_if<DeterministicArrivals>(&a)) return d->rate_hz;
  return std::nullopt;
}

inline void set_arrival_rate(ArrivalProcess& a, double rate_hz) {
  if (auto* p = std::get_if<PoissonArrivals>(&a))
    p->rate_hz = rate_hz;
  else if (auto* d = std::get_if<DeterministicArrivals>(&a))
    d->rate_hz = rate_hz;
  else
    throw ConfigError("generate-at-will arrivals have no rate to set");
}

inline double service_rate(const ServiceProcess& s) {
  return std::visit([](const auto& x) { return x.rate_hz; }, s);
}

/// rho = lambda / mu, when the arrival process has a rate.
inline std::optional<double> offered_load(const SimConfig& cfg) {
  const auto lambda = arrival_rate(cfg.arrival);
  if (!lambda) return std::nullopt;
  return *lambda / service_rate(cfg.service);
}

inline void check(const SimConfig& cfg) {
  if (const auto lambda = arrival_rate(cfg.arrival); lambda && !(*lambda > 0.0))
    throw ConfigError("arrival rate must be positive");
  if (auto* g = std::get_if<GenerateAtWill>(&cfg.arrival); g && !g->wait_after_idle)
    throw ConfigError("generate-at-will source needs a wait policy");
  if (!(service_rate(cfg.service) > 0.0)) throw ConfigError("service rate must be positive");
  if (cfg.ingress_loss < 0.0 || cfg.ingress_loss >= 1.0 || cfg.link_loss < 0.0 || cfg.link_loss >= 1.0)
    throw ConfigError("loss probabilities must lie in [0, 1)");
  if (cfg.horizon == 0) throw ConfigError("horizon must be at least one arrival");
  if (cfg.propagation.count() < 0) throw ConfigError("propagation delay must be non-negative");
  if (cfg.channel) cfg.channel->check();
}

struct SimStats {
  std::uint64_t arrivals = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_buffer = 0;
  std::uint64_t superseded = 0;  // LCFS-1 waiting packet replaced by a newer one
  std::uint64_t lost_ingress = 0;
  std::uint64_t lost_link = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t queued_at_end = 0;
  double mean_in_system = 0.0;  // time average over [0, end of run]
  double avg_delay_s = 0.0;     // over delivered packets
  bool unstable = false;        // FCFS, unbounded buffer, rho >= 1

  std::uint64_t losses() const { return dropped_buffer + superseded + lost_ingress + lost_link; }
};

struct SimRun {
  AgeTrace trace;
  SimStats stats;
};

namespace detail {

class SingleServer {
 public:
  explicit SingleServer(const SimConfig& cfg)
      : cfg_{cfg},
        arrival_rng_{cfg.seed, 1},
        service_rng_{cfg.seed, 2},
        loss_rng_{cfg.seed, 3},
        load_{cfg.channel && arrival_rate(cfg.arrival)
                  ? cfg.channel->offered_load(*arrival_rate(cfg.arrival))
                  : 0.0} {
    records_.reserve(cfg.horizon);
  }

  SimRun run() {
    if (std::holds_alternative<GenerateAtWill>(cfg_.arrival))
      schedule_generated(Nanos{0});
    else
      events_.push(Nanos{0}, Event{Kind::arrival});

    while (!events_.empty()) {
      const auto e = events_.pop();
      account(e.time);
      if (e.payload.kind == Kind::arrival)
        on_arrival(e.time);
      else
        on_departure(e.time);
      if (!cfg_.drain && records_.size() == cfg_.horizon && e.payload.kind == Kind::arrival) break;
    }
    return finish();
  }

 private:
  enum class Kind { arrival, departure };
  struct Event {
    Kind kind;
  };

  Nanos interarrival() {
    if (auto* p = std::get_if<PoissonArrivals>(&cfg_.arrival))
      return from_seconds(arrival_rng_.exponential(p->rate_hz));
    return from_seconds(1.0 / std::get<DeterministicArrivals>(cfg_.arrival).rate_hz);
  }

  Nanos service_time() {
    if (auto* e = std::get_if<ExponentialService>(&cfg_.service))
      return from_seconds(service_rng_.exponential(e->rate_hz));
    return from_seconds(1.0 / std::get<DeterministicService>(cfg_.service).rate_hz);
  }

  void account(Nanos now) {
    in_system_area_ += static_cast<long double>(in_system_) * to_seconds(now - last_change_);
    last_change_ = now;
  }

  void schedule_generated(Nanos now) {
    if (records_.size() >= cfg_.horizon) return;
    IdleView view{now, stats_.delivered, last_system_time_};
    const Nanos wait = std::get<GenerateAtWill>(cfg_.arrival).wait_after_idle(view);
    if (wait.count() < 0) throw ConfigError("generate-at-will wait must be non-negative");
    events_.push(now + wait, Event{Kind::arrival});
  }

  void on_arrival(Nanos now) {
    const std::uint64_t id = records_.size();
    records_.push_back(PacketRecord{id, now, std::nullopt, cfg_.packet_bytes});
    ++stats_.arrivals;
    const bool exogenous = !std::holds_alternative<GenerateAtWill>(cfg_.arrival);
    if (exogenous && records_.size() < cfg_.horizon) events_.push(now + interarrival(), Event{Kind::arrival});

    if (loss_rng_.bernoulli(cfg_.ingress_loss)) {
      ++stats_.lost_ingress;
      if (!exogenous && !serving_) schedule_generated(now);
      return;
    }
    if (!serving_) {
      ++in_system_;
      start(id, now);
      return;
    }
    if (cfg_.discipline == Discipline::fcfs) {
      if (cfg_.buffer && waiting_.size() >= *cfg_.buffer) {
        ++stats_.dropped_buffer;
        return;
      }
      waiting_.push_back(id);
      ++in_system_;
      return;
    }
    if (!waiting_.empty()) {
      ++stats_.superseded;
      waiting_.clear();
      --in_system_;
    }
    waiting_.push_back(id);
    ++in_system_;
  }

  void start(std::uint64_t id, Nanos now) {
    serving_ = id;
    events_.push(now + service_time(), Event{Kind::departure});
  }

  void on_departure(Nanos now) {
    const std::uint64_t id = *serving_;
    double p_loss = cfg_.link_loss;
    if (cfg_.channel) p_loss = 1.0 - (1.0 - p_loss) * (1.0 - cfg_.channel->loss_probability(load_));
    const bool lost = loss_rng_.bernoulli(p_loss);
    if (lost && cfg_.channel && cfg_.channel->retransmit) {
      ++stats_.retransmissions;
      events_.push(now + cfg_.channel->rto + service_time(), Event{Kind::departure});
      return;
    }
    if (lost) {
      ++stats_.lost_link;
    } else {
      Nanos recv = now + cfg_.propagation;
      if (cfg_.channel) recv += cfg_.channel->path_delay(load_);
      records_[id].recv_ts = recv;
      ++stats_.delivered;
      delay_sum_ += to_seconds(recv - records_[id].gen_ts);
      last_system_time_ = recv - records_[id].gen_ts;
    }
    --in_system_;
    serving_.reset();
    if (!waiting_.empty()) {
      std::uint64_t next = 0;
      if (cfg_.discipline == Discipline::fcfs) {
        next = waiting_.front();
        waiting_.pop_front();
      } else {
        next = waiting_.back();
        waiting_.clear();
      }
      start(next, now);
    } else if (std::holds_alternative<GenerateAtWill>(cfg_.arrival)) {
      schedule_generated(now);
    }
  }

  SimRun finish() {
    stats_.queued_at_end = in_system_;
    stats_.mean_in_system =
        last_change_.count() > 0 ? static_cast<double>(in_system_area_ / to_seconds(last_change_)) : 0.0;
    stats_.avg_delay_s = stats_.delivered ? delay_sum_ / static_cast<double>(stats_.delivered) : 0.0;
    const auto rho = offered_load(cfg_);
    stats_.unstable = cfg_.discipline == Discipline::fcfs && !cfg_.buffer && rho && *rho >= 1.0;
    SimRun run;
    run.trace = AgeTrace::from_records(std::move(records_));
    run.stats = stats_;
    return run;
  }

  const SimConfig& cfg_;
  Rng arrival_rng_;
  Rng service_rng_;
  Rng loss_rng_;
  double load_;
  EventQueue<Event> events_;
  std::vector<PacketRecord> records_;
  std::deque<std::uint64_t> waiting_;
  std::optional<std::uint64_t> serving_;
  std::optional<Nanos> last_system_time_;
  std::uint64_t in_system_ = 0;
  long double in_system_area_ = 0.0L;
  Nanos last_change_{0};
  double delay_sum_ = 0.0;
  SimStats stats_;
};

}  // namespace detail

/// Runs one single-server queue until the arrival horizon is exhausted (and,
/// with `drain`, the system is empty). Identical config and seed give a
/// bit-identical trace.
inline SimRun simulate(const SimConfig& cfg) {
  check(cfg);
  return detail::SingleServer{cfg}.run();
}

inline std::string describe(const ArrivalProcess& a) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (auto* p = std::get_if<PoissonArrivals>(&a))
    os << "poisson:" << p->rate_hz;
  else if (auto* d = std::get_if<DeterministicArrivals>(&a))
    os << "deterministic:" << d->rate_hz;
  else
    os << "generate-at-will";
  return os.str();
}

inline std::string describe(const ServiceProcess& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (auto* e = std::get_if<ExponentialService>(&s))
    os << "exponential:" << e->rate_hz;
  else
    os << "deterministic:" << std::get<DeterministicService>(s).rate_hz;
  return os.str();
}

/// Run-metadata sidecar: one key=value per line.
inline void write_metadata(std::ostream& out, const SimConfig& cfg, const SimStats& st) {
  out << std::setprecision(17);
  out << "seed=" << cfg.seed << '\n'
      << "arrival=" << describe(cfg.arrival) << '\n'
      << "service=" << describe(cfg.service) << '\n'
      << "discipline=" << to_string(cfg.discipline) << '\n'
      << "buffer=" << (cfg.buffer ? std::to_string(*cfg.buffer) : std::string{"inf"}) << '\n'
      << "ingress_loss=" << cfg.ingress_loss << '\n'
      << "link_loss=" << cfg.link_loss << '\n'
      << "propagation_ns=" << cfg.propagation.count() << '\n'
      << "channel=" << (cfg.channel ? (cfg.channel->retransmit ? "retransmit" : "datagram") : "none") << '\n'
      << "horizon=" << cfg.horizon << '\n'
      << "drain=" << (cfg.drain ? 1 : 0) << '\n'
      << "arrivals=" << st.arrivals << '\n'
      << "delivered=" << st.delivered << '\n'
      << "loss=" << st.losses() << '\n'
      << "dropped_buffer=" << st.dropped_buffer << '\n'
      << "superseded=" << st.superseded << '\n'
      << "lost_ingress=" << st.lost_ingress << '\n'
      << "lost_link=" << st.lost_link << '\n'
      << "retransmissions=" << st.retransmissions << '\n'
      << "queued=" << st.queued_at_end << '\n'
      << "mean_in_system=" << st.mean_in_system << '\n'
      << "avg_delay_s=" << st.avg_delay_s << '\n'
      << "unstable=" << (st.unstable ? 1 : 0) << '\n';
}

}  // namespace aoi::sim
