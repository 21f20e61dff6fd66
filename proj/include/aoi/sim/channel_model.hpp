#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>

#include "aoi/error.hpp"
#include "aoi/time.hpp"

namespace aoi::sim {

enum class Regime { relaxed, busy, panicked };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::relaxed: return "relaxed";
    case Regime::busy: return "busy";
    case Regime::panicked: return "panicked";
  }
  return "?";
}

/// Load-dependent path impairments for a best-effort datagram path. Offered
/// load is the sending rate times the per-packet transmission time. Below
/// `loss_onset` nothing happens (relaxed); between the thresholds packets are
/// dropped at random but delay is unchanged (busy); above `delay_onset` loss
/// keeps rising and queueing delay grows until it saturates at
/// `max_queueing_delay` (panicked).
///
/// With `retransmit` set, lost packets are resent after `rto` and block the
/// link meanwhile. That is a crude stand-in for a reliable transport's
/// head-of-line blocking and is only meant to be approximate.
struct ChannelModel {
  Nanos base_rtt{0};
  double bandwidth_bps = 1e6;
  std::uint32_t packet_bytes = 1058;
  double loss_onset = 0.5;
  double delay_onset = 0.9;
  double busy_loss = 0.02;
  double panicked_loss = 0.2;
  Nanos max_queueing_delay{from_seconds(0.05)};
  bool retransmit = false;
  Nanos rto{from_seconds(0.2)};

  void check() const {
    if (!(loss_onset > 0.0 && loss_onset < delay_onset && delay_onset <= 1.0))
      throw ConfigError("channel thresholds must satisfy 0 < loss_onset < delay_onset <= 1");
    if (!(bandwidth_bps > 0.0)) throw ConfigError("channel bandwidth must be positive");
    if (busy_loss < 0.0 || panicked_loss < busy_loss || panicked_loss >= 1.0)
      throw ConfigError("channel loss levels must satisfy 0 <= busy <= panicked < 1");
  }

  Nanos transmission_time() const { return from_seconds(packet_bytes * 8.0 / bandwidth_bps); }

  double offered_load(double rate_hz) const { return rate_hz * to_seconds(transmission_time()); }

  Regime regime(double load) const {
    if (load < loss_onset) return Regime::relaxed;
    if (load < delay_onset) return Regime::busy;
    return Regime::panicked;
  }

  double loss_probability(double load) const {
    switch (regime(load)) {
      case Regime::relaxed: return 0.0;
      case Regime::busy: return busy_loss;
      case Regime::panicked: {
        // climbs from busy_loss to panicked_loss over [delay_onset, 2 delay_onset]
        const double x = std::clamp((load - delay_onset) / delay_onset, 0.0, 1.0);
        return busy_loss + (panicked_loss - busy_loss) * x;
      }
    }
    return 0.0;
  }

  Nanos queueing_delay(double load) const {
    if (regime(load) != Regime::panicked) return Nanos{0};
    const double x = std::clamp((load - delay_onset) / (1.0 - delay_onset + 1e-12), 0.0, 1.0);
    return from_seconds(to_seconds(max_queueing_delay) * x);
  }

  /// One-way delay after transmission: half the base RTT plus queueing.
  Nanos path_delay(double load) const { return base_rtt / 2 + queueing_delay(load); }
};

}  // namespace aoi::sim
