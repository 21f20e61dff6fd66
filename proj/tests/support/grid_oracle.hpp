#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "aoi/age/trace.hpp"

namespace aoi::testing {

/// Brute-force reference for time averages of g(age). Samples the age at the
/// midpoint of each grid cell of width `step` between the first and last
/// reception, tracking the newest received generation stamp directly from the
/// raw records. Shares nothing with the closed-form code path.
template <typename G>
double grid_time_average(const AgeTrace& trace, G g, Nanos step = Nanos{1000}) {
  std::vector<std::pair<std::int64_t, std::int64_t>> arrivals;  // (recv, gen)
  for (const auto& r : trace.records)
    if (r.recv_ts) arrivals.emplace_back(r.recv_ts->count(), r.gen_ts.count());
  std::sort(arrivals.begin(), arrivals.end());
  const std::int64_t from = arrivals.front().first;
  const std::int64_t to = arrivals.back().first;
  const std::int64_t h = step.count();

  std::size_t next = 0;
  std::optional<std::int64_t> newest;
  long double sum = 0.0L, comp = 0.0L;
  for (std::int64_t cell = from; cell < to; cell += h) {
    const std::int64_t width = std::min(h, to - cell);
    const std::int64_t mid2 = 2 * cell + width;  // twice the midpoint, keeps it integral
    while (next < arrivals.size() && 2 * arrivals[next].first <= mid2) {
      if (!newest || arrivals[next].second > *newest) newest = arrivals[next].second;
      ++next;
    }
    const double age = (static_cast<double>(mid2) / 2.0 - static_cast<double>(*newest)) * 1e-9;
    const long double term = static_cast<long double>(g(age)) * width * 1e-9L - comp;
    const long double t = sum + term;
    comp = (t - sum) - term;
    sum = t;
  }
  return static_cast<double>(sum / ((to - from) * 1e-9L));
}

/// Age just before each reception that lowers it, found by scanning all
/// earlier receptions for every delivery (quadratic, deliberately naive).
inline std::vector<double> brute_force_peaks(const AgeTrace& trace) {
  std::vector<double> peaks;
  std::vector<const PacketRecord*> got;
  for (const auto& r : trace.records)
    if (r.recv_ts) got.push_back(&r);
  std::optional<std::int64_t> first_recv;
  for (const auto* r : got) first_recv = first_recv ? std::min(*first_recv, r->recv_ts->count()) : r->recv_ts->count();
  for (const auto* r : got) {
    const auto t = r->recv_ts->count();
    if (t == *first_recv) continue;
    std::optional<std::int64_t> before, at;
    for (const auto* q : got) {
      if (q->recv_ts->count() < t) before = before ? std::max(*before, q->gen_ts.count()) : q->gen_ts.count();
      if (q->recv_ts->count() <= t) at = at ? std::max(*at, q->gen_ts.count()) : q->gen_ts.count();
    }
    // only receptions that actually lower the age produce a peak; the same
    // instant is counted once
    if (before && *at > *before && r->gen_ts.count() == *at) peaks.push_back((t - *before) * 1e-9);
  }
  return peaks;
}

}  // namespace aoi::testing
