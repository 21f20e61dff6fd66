#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>

#include "aoi/policy/observation.hpp"

namespace aoi::policy {

enum class AcpAction { inc, dec, mdec };

inline std::string_view to_string(AcpAction a) {
  switch (a) {
    case AcpAction::inc: return "INC";
    case AcpAction::dec: return "DEC";
    case AcpAction::mdec: return "MDEC";
  }
  return "?";
}

struct AcpConfig {
  double kappa = 1.0;         // additive step, also the floor of the target
  double backlog_cap = 100.0; // ceiling of the target
  Nanos min_epoch{from_seconds(0.01)};
  double initial_target = 1.0;

  void check() const {
    if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
    if (!(backlog_cap >= kappa)) throw ConfigError("backlog cap must be at least kappa");
    if (min_epoch.count() <= 0) throw ConfigError("epoch length must be positive");
  }
};

struct AcpState {
  double target_backlog = 1.0;
  double kappa = 1.0;
  double backlog_cap = 100.0;
  unsigned mdec_streak = 0;
  std::optional<double> prev_age;
  std::optional<double> prev_backlog;
  Nanos epoch_len{from_seconds(0.01)};
  Nanos min_epoch{from_seconds(0.01)};

  static AcpState from(const AcpConfig& cfg) {
    cfg.check();
    AcpState s;
    s.kappa = cfg.kappa;
    s.backlog_cap = cfg.backlog_cap;
    s.target_backlog = std::clamp(cfg.initial_target, cfg.kappa, cfg.backlog_cap);
    s.min_epoch = cfg.min_epoch;
    s.epoch_len = cfg.min_epoch;
    return s;
  }
};

struct AcpDecision {
  AcpAction action;
  double rate_hz;
};

/// Epoch-end update. Decision on (change in average age, change in backlog):
///   age up,   backlog up    -> MDEC (target * 2^-streak)
///   age up,   backlog flat/down -> INC
///   age flat/down, backlog up   -> DEC
///   age flat/down, backlog flat/down -> INC
/// INC/DEC move the target by kappa. An epoch without ACKs counts as MDEC.
/// The target stays in [kappa, cap]; rate = target / ewma_rtt.
inline AcpDecision acp_epoch_update(AcpState& st, const PolicyObservation& obs) {
  if (!(obs.ewma_rtt_s > 0.0)) throw NotReady("ACP needs an RTT estimate");
  AcpAction action = AcpAction::inc;
  if (obs.acks_in_epoch == 0) {
    action = AcpAction::mdec;
  } else {
    const double d_age = st.prev_age ? obs.avg_age_epoch_s - *st.prev_age : 0.0;
    const double d_backlog = st.prev_backlog ? obs.backlog - *st.prev_backlog : 0.0;
    if (d_age > 0.0)
      action = d_backlog > 0.0 ? AcpAction::mdec : AcpAction::inc;
    else
      action = d_backlog > 0.0 ? AcpAction::dec : AcpAction::inc;
  }

  switch (action) {
    case AcpAction::inc:
      st.mdec_streak = 0;
      st.target_backlog += st.kappa;
      break;
    case AcpAction::dec:
      st.mdec_streak = 0;
      st.target_backlog -= st.kappa;
      break;
    case AcpAction::mdec:
      ++st.mdec_streak;
      st.target_backlog *= std::exp2(-static_cast<double>(st.mdec_streak));
      break;
  }
  st.target_backlog = std::clamp(st.target_backlog, st.kappa, st.backlog_cap);
  if (obs.acks_in_epoch > 0) {
    st.prev_age = obs.avg_age_epoch_s;
    st.prev_backlog = obs.backlog;
  }
  st.epoch_len = std::max(st.min_epoch, from_seconds(obs.ewma_rtt_s));
  return {action, st.target_backlog / obs.ewma_rtt_s};
}

}  // namespace aoi::policy
