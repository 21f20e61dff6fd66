#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "aoi/age/stats.hpp"

namespace aoi {

enum class PenaltyKind { linear, exponential, logarithmic };

inline PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "linear") return PenaltyKind::linear;
  if (name == "exponential" || name == "exp") return PenaltyKind::exponential;
  if (name == "logarithmic" || name == "log") return PenaltyKind::logarithmic;
  throw ConfigError("unknown penalty kind '" + std::string{name} + "'");
}

inline std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::linear: return "linear";
    case PenaltyKind::exponential: return "exponential";
    case PenaltyKind::logarithmic: return "logarithmic";
  }
  return "?";
}

/// Age penalty f(age) with its antiderivative F(t) = int_0^t f.
///   linear       f = a t             F = a t^2 / 2
///   exponential  f = e^{a t} - 1     F = (e^{a t} - 1 - a t) / a
///   logarithmic  f = log(a t + 1)    F = (t + 1/a) log(a t + 1) - t
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::linear;
  double alpha = 1.0;

  void check() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("penalty alpha must be positive");
  }

  double value(double age) const {
    switch (kind) {
      case PenaltyKind::linear: return alpha * age;
      case PenaltyKind::exponential: return std::expm1(alpha * age);
      case PenaltyKind::logarithmic: return std::log1p(checked_log_arg(age));
    }
    throw ConfigError("invalid penalty kind");
  }

  double integral(double t) const {
    switch (kind) {
      case PenaltyKind::linear: return alpha * t * t / 2.0;
      case PenaltyKind::exponential: return (std::expm1(alpha * t) - alpha * t) / alpha;
      case PenaltyKind::logarithmic: return (t + 1.0 / alpha) * std::log1p(checked_log_arg(t)) - t;
    }
    throw ConfigError("invalid penalty kind");
  }

 private:
  double checked_log_arg(double t) const {
    const double x = alpha * t;
    if (!(x > -1.0)) throw DomainError("logarithmic penalty undefined for age " + std::to_string(t));
    return x;
  }
};

/// Time-average of f(age) over [first recv, last recv], integrated exactly
/// per inter-delivery interval where the age climbs from beta to theta.
inline double penalty_average(const AgeTrace& trace, const PenaltySpec& p) {
  p.check();
  const auto d = detail::require_deliveries(trace);
  detail::CompensatedSum total;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double beta = detail::secs(d[i - 1].recv - d[i - 1].gen);
    const double theta = detail::secs(d[i].recv - d[i - 1].gen);
    total += p.integral(theta) - p.integral(beta);
  }
  return total.value() / detail::secs(d.back().recv - d.front().recv);
}

}  // namespace aoi
