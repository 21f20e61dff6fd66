#pragma once

#include <algorithm>
#include <vector>

#include "aoi/age/trace.hpp"
#include "aoi/detail/sum.hpp"

namespace aoi {

namespace detail {

inline std::vector<Delivery> require_deliveries(const AgeTrace& trace, std::size_t minimum = 2) {
  auto d = effective_deliveries(trace);
  if (d.size() < minimum)
    throw InsufficientData("need at least " + std::to_string(minimum) +
                           " in-order deliveries, trace has " + std::to_string(d.size()));
  return d;
}

inline double secs(Nanos d) { return to_seconds(d); }

// Twice an age area in ns^2, exact for integral stamps.
__extension__ typedef __int128 Area2;

inline Area2 wide(Nanos d) { return static_cast<Area2>(d.count()); }

inline Seconds area_over_window(Area2 twice_area, Nanos window) {
  const long double ns2 = static_cast<long double>(twice_area) / 2.0L;
  return Seconds{static_cast<double>(ns2 / 1e18L / (static_cast<long double>(window.count()) * 1e-9L))};
}

}  // namespace detail

/// Age at time t: t minus the newest generation stamp received by t. Before
/// the first delivery the age grows from `initial_age` at t_start.
inline Seconds instantaneous_age(const AgeTrace& trace, Nanos t) {
  if (t < trace.t_start || t > trace.t_end) throw RangeError("time outside observation window");
  std::optional<Nanos> newest;
  for (const auto& r : trace.records)
    if (r.recv_ts && *r.recv_ts <= t && (!newest || r.gen_ts > *newest)) newest = r.gen_ts;
  if (!newest) return trace.initial_age + Seconds{detail::secs(t - trace.t_start)};
  return Seconds{detail::secs(t - *newest)};
}

/// Time-average age over [first recv, last recv] from the trapezoids between
/// consecutive generation stamps. Relative to the infinite-horizon sum the
/// start polygon is replaced by -Y_1^2/2 so the window matches the H-form.
inline Seconds average_age_q(const AgeTrace& trace) {
  const auto d = detail::require_deliveries(trace);
  detail::Area2 area = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const auto x = detail::wide(d[i].gen - d[i - 1].gen);
    area += x * (detail::wide(d[i].recv - d[i].gen) + detail::wide(d[i].recv - d[i - 1].gen));
  }
  const auto y_first = detail::wide(d.front().recv - d.front().gen);
  const auto y_last = detail::wide(d.back().recv - d.back().gen);
  area += y_last * y_last - y_first * y_first;
  return detail::area_over_window(area, d.back().recv - d.front().recv);
}

/// Time-average age over [first recv, last recv] from the areas between
/// consecutive reception stamps.
inline Seconds average_age_h(const AgeTrace& trace) {
  const auto d = detail::require_deliveries(trace);
  detail::Area2 area = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const auto gap = detail::wide(d[i].recv - d[i - 1].recv);
    area += gap * (2 * detail::wide(d[i - 1].recv - d[i - 1].gen) + gap);
  }
  return detail::area_over_window(area, d.back().recv - d.front().recv);
}

inline Seconds average_age(const AgeTrace& trace) { return average_age_h(trace); }

/// Mean of the age just before each delivery, r_i - s_{i-1}, for i >= 2.
inline Seconds peak_age(const AgeTrace& trace) {
  const auto d = detail::require_deliveries(trace);
  detail::CompensatedSum sum;
  for (std::size_t i = 1; i < d.size(); ++i) sum += detail::secs(d[i].recv - d[i - 1].gen);
  return Seconds{sum.value() / static_cast<double>(d.size() - 1)};
}

/// Mean system time r_i - s_i over the deliveries that lowered the age.
inline Seconds mean_system_time(const AgeTrace& trace) {
  const auto d = detail::require_deliveries(trace, 1);
  detail::CompensatedSum sum;
  for (const auto& x : d) sum += detail::secs(x.recv - x.gen);
  return Seconds{sum.value() / static_cast<double>(d.size())};
}

/// Time-average of instantaneous_age over an arbitrary window [from, to]
/// inside the observation window, in closed form.
inline Seconds window_average_age(const AgeTrace& trace, Nanos from, Nanos to) {
  if (from < trace.t_start || to > trace.t_end || to <= from)
    throw RangeError("averaging window outside observation window");
  const auto d = effective_deliveries(trace);
  auto it = std::upper_bound(d.begin(), d.end(), from,
                             [](Nanos t, const Delivery& x) { return t < x.recv; });
  double age = instantaneous_age(trace, from).count();
  Nanos cursor = from;
  detail::CompensatedSum area;
  for (; it != d.end() && it->recv <= to; ++it) {
    const double len = detail::secs(it->recv - cursor);
    area += (2.0 * age + len) * len / 2.0;
    age = detail::secs(it->recv - it->gen);
    cursor = it->recv;
  }
  const double len = detail::secs(to - cursor);
  area += (2.0 * age + len) * len / 2.0;
  return Seconds{area.value() / detail::secs(to - from)};
}

}  // namespace aoi
