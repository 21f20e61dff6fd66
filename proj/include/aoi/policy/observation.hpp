#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "aoi/error.hpp"
#include "aoi/time.hpp"

namespace aoi::policy {

/// What a rate controller sees from its feedback path. RTT-derived fields are
/// zero until the first ACK arrives.
struct PolicyObservation {
  Nanos now{0};
  double last_ack_rtt_s = 0.0;
  double ewma_rtt_s = 0.0;
  double ewma_inter_ack_s = 0.0;
  double backlog = 0.0;  // packets sent but not yet acknowledged
  double avg_age_epoch_s = 0.0;
  std::uint64_t acks_in_epoch = 0;
};

class Ewma {
 public:
  explicit Ewma(double alpha = 0.125) : alpha_{alpha} {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("EWMA factor must lie in (0, 1]");
  }

  double update(double sample) {
    value_ = value_ ? (1.0 - alpha_) * *value_ + alpha_ * sample : sample;
    return *value_;
  }

  bool ready() const { return value_.has_value(); }
  double value() const { return value_.value_or(0.0); }

 private:
  double alpha_;
  std::optional<double> value_;
};

}  // namespace aoi::policy
