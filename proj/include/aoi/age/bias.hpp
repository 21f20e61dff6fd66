#pragma once

#include <cmath>
#include <cstdint>

#include "aoi/age/penalty.hpp"

namespace aoi {

/// Constant offset of the receiver clock relative to the sender clock.
struct BiasModel {
  Nanos bias{0};
};

/// Shifts every reception stamp by the bias, as when the receiver reports
/// stamps from its own clock. Generation stamps are untouched.
inline AgeTrace apply_bias(const AgeTrace& trace, BiasModel b) {
  AgeTrace out = trace;
  for (auto& r : out.records) {
    if (!r.recv_ts) continue;
    std::int64_t shifted = 0;
    if (__builtin_add_overflow(r.recv_ts->count(), b.bias.count(), &shifted) || shifted < 0)
      throw RangeError("bias drives reception stamp of packet " + std::to_string(r.id) +
                       " out of range");
    r.recv_ts = Nanos{shifted};
    out.t_end = std::max(out.t_end, *r.recv_ts);
    out.t_start = std::min(out.t_start, *r.recv_ts);
  }
  return out;
}

/// Change of the average penalty caused by the clock bias, from the
/// per-interval closed forms (beta = r_{i-1} - s_{i-1}, theta = r_i - s_{i-1}):
///   linear       alpha B
///   exponential  sum (e^{a theta} - e^{a beta})(e^{a B} - 1) / (a T)
///   logarithmic  sum G(theta+B) - G(beta+B) - G(theta) + G(beta) over T,
///                G(t) = (t + 1/a) log(a t + 1)
inline double penalty_bias(const AgeTrace& trace, BiasModel b, const PenaltySpec& p) {
  p.check();
  const auto d = detail::require_deliveries(trace);
  const double bias = to_seconds(b.bias);
  const double a = p.alpha;
  if (p.kind == PenaltyKind::linear) return a * bias;

  const double span = detail::secs(d.back().recv - d.front().recv);
  detail::CompensatedSum total;
  if (p.kind == PenaltyKind::exponential) {
    const double bias_factor = std::expm1(a * bias);
    for (std::size_t i = 1; i < d.size(); ++i) {
      const double beta = detail::secs(d[i - 1].recv - d[i - 1].gen);
      const double rise = detail::secs(d[i].recv - d[i - 1].recv);  // theta - beta
      total += std::exp(a * beta) * std::expm1(a * rise) * bias_factor;
    }
    return total.value() / (a * span);
  }

  auto g = [&](double t) {
    const double x = a * t;
    if (!(x > -1.0)) throw DomainError("logarithmic penalty undefined for biased age " + std::to_string(t));
    return (t + 1.0 / a) * std::log1p(x);
  };
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double beta = detail::secs(d[i - 1].recv - d[i - 1].gen);
    const double theta = detail::secs(d[i].recv - d[i - 1].gen);
    total += g(theta + bias) - g(beta + bias) - g(theta) + g(beta);
  }
  return total.value() / span;
}

}  // namespace aoi
