#pragma once

#include <cmath>

#include "aoi/policy/observation.hpp"
#include "aoi/sim/queue.hpp"

namespace aoi::policy {

/// Zero-wait: send a fresh update the moment the previous one is acknowledged.
inline bool zero_wait_next(const PolicyObservation& obs) { return obs.backlog <= 0.0; }

/// Generate-at-will hook for the queue simulator driven by zero_wait_next.
/// The simulator only asks when the server is idle, so the answer is always
/// "now".
inline sim::GenerateAtWill zero_wait_source() {
  return sim::GenerateAtWill{[](const sim::IdleView&) {
    PolicyObservation idle;
    if (!zero_wait_next(idle)) throw NotReady("zero-wait asked while busy");
    return Nanos{0};
  }};
}

/// Lazy: one packet in flight on average, by sending at 1 / RTT.
inline double lazy_rate(const PolicyObservation& obs) {
  if (!(obs.ewma_rtt_s > 0.0) || !std::isfinite(obs.ewma_rtt_s))
    throw NotReady("lazy rate needs an RTT estimate");
  return 1.0 / obs.ewma_rtt_s;
}

}  // namespace aoi::policy
