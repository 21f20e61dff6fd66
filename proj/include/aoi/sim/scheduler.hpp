#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "aoi/age/stats.hpp"
#include "aoi/sim/rng.hpp"

namespace aoi::sim {

enum class PollPolicy { round_robin, greedy, max_weight };

inline PollPolicy parse_poll_policy(std::string_view s) {
  if (s == "round-robin" || s == "rr") return PollPolicy::round_robin;
  if (s == "greedy" || s == "greedy-max-age") return PollPolicy::greedy;
  if (s == "max-weight" || s == "mw") return PollPolicy::max_weight;
  throw ConfigError("unknown polling policy '" + std::string{s} + "'");
}

/// Access point polling N sources, one per frame. Each source holds only its
/// freshest sample, generated at the start of the frame in which it is polled.
struct SchedulerConfig {
  std::vector<double> success_prob;  // p_i per source
  Nanos frame{from_seconds(1e-3)};
  PollPolicy policy = PollPolicy::round_robin;
  // Max-weight picks argmax p_i * age_i^exponent. Local convention; the
  // exponent is a knob because the weight used in practice is not pinned down.
  double weight_exponent = 1.0;

  std::size_t sources() const { return success_prob.size(); }

  void check() const {
    if (success_prob.empty()) throw ConfigError("scheduler needs at least one source");
    for (double p : success_prob)
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("success probabilities must lie in (0, 1]");
    if (frame.count() <= 0) throw ConfigError("frame length must be positive");
    if (!(weight_exponent > 0.0)) throw ConfigError("weight exponent must be positive");
  }
};

struct SchedulerRun {
  std::vector<AgeTrace> per_source;
  std::vector<std::uint64_t> polls;

  /// Sum over sources of each source's time-average age.
  Seconds total_average_age() const {
    Seconds total{0.0};
    for (const auto& t : per_source) total += average_age(t);
    return total;
  }
};

/// Frame k spans [kF, (k+1)F]. The polled source's sample is stamped kF and,
/// if the poll succeeds, received at (k+1)F, so its age drops to one frame.
/// Greedy ties and max-weight ties go to the lowest index.
inline SchedulerRun simulate_scheduler(const SchedulerConfig& cfg, std::uint64_t frames, std::uint64_t seed) {
  cfg.check();
  const std::size_t n = cfg.sources();
  Rng rng{seed, 7};
  std::vector<std::vector<PacketRecord>> records(n);
  std::vector<Nanos> newest(n, Nanos{0});
  SchedulerRun run;
  run.polls.assign(n, 0);
  std::uint64_t next_id = 0;

  for (std::uint64_t k = 0; k < frames; ++k) {
    const Nanos start = cfg.frame * static_cast<std::int64_t>(k);
    std::size_t pick = 0;
    switch (cfg.policy) {
      case PollPolicy::round_robin: pick = static_cast<std::size_t>(k % n); break;
      case PollPolicy::greedy:
        for (std::size_t i = 1; i < n; ++i)
          if (start - newest[i] > start - newest[pick]) pick = i;
        break;
      case PollPolicy::max_weight: {
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double w = cfg.success_prob[i] * std::pow(to_seconds(start - newest[i]), cfg.weight_exponent);
          if (w > best) {
            best = w;
            pick = i;
          }
        }
        break;
      }
    }
    ++run.polls[pick];
    PacketRecord r{next_id++, start, std::nullopt, 0};
    if (rng.uniform() < cfg.success_prob[pick]) {
      r.recv_ts = start + cfg.frame;
      newest[pick] = start;
    }
    records[pick].push_back(r);
  }

  const Nanos end = cfg.frame * static_cast<std::int64_t>(frames);
  for (std::size_t i = 0; i < n; ++i) {
    AgeTrace t;
    t.records = std::move(records[i]);
    t.t_start = Nanos{0};
    t.t_end = end;
    run.per_source.push_back(std::move(t));
  }
  return run;
}

}  // namespace aoi::sim
