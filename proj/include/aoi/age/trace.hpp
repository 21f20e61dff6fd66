#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/time.hpp"

namespace aoi {

/// One status update: when it was generated (sender clock) and when, if ever,
/// it was received (receiver clock).
struct PacketRecord {
  std::uint64_t id = 0;
  Nanos gen_ts{0};
  std::optional<Nanos> recv_ts;
  std::uint32_t size_bytes = 0;

  bool delivered() const { return recv_ts.has_value(); }
  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

/// A delivery that actually lowered the age: generation and reception stamps.
struct Delivery {
  Nanos gen;
  Nanos recv;
  friend bool operator==(const Delivery&, const Delivery&) = default;
};

/// Records in id order plus the observation window. Statistics other than
/// instantaneous_age only look at the deliveries; the window and the initial
/// age define the path before the first delivery.
struct AgeTrace {
  std::vector<PacketRecord> records;
  Nanos t_start{0};
  Nanos t_end{0};
  Seconds initial_age{0.0};

  // Window spans the first generation stamp to the last stamp of any kind.
  static AgeTrace from_records(std::vector<PacketRecord> records) {
    AgeTrace trace;
    trace.records = std::move(records);
    if (trace.records.empty()) return trace;
    Nanos lo = trace.records.front().gen_ts;
    Nanos hi = lo;
    for (const auto& r : trace.records) {
      lo = std::min(lo, r.gen_ts);
      hi = std::max(hi, r.gen_ts);
      if (r.recv_ts) {
        lo = std::min(lo, *r.recv_ts);
        hi = std::max(hi, *r.recv_ts);
      }
    }
    trace.t_start = lo;
    trace.t_end = hi;
    return trace;
  }

  friend bool operator==(const AgeTrace&, const AgeTrace&) = default;
};

inline std::size_t delivered_count(const AgeTrace& trace) {
  return static_cast<std::size_t>(
      std::count_if(trace.records.begin(), trace.records.end(),
                    [](const PacketRecord& r) { return r.delivered(); }));
}

inline std::size_t loss_count(const AgeTrace& trace) {
  return trace.records.size() - delivered_count(trace);
}

/// Deliveries in reception order with obsolete packets removed: a packet whose
/// generation stamp is not newer than one already received cannot lower the
/// age. Result has strictly increasing gen and recv stamps.
inline std::vector<Delivery> effective_deliveries(const AgeTrace& trace) {
  std::vector<Delivery> all;
  all.reserve(trace.records.size());
  for (const auto& r : trace.records)
    if (r.recv_ts) all.push_back({r.gen_ts, *r.recv_ts});
  // simultaneous receptions: newest first, so the older ones become obsolete
  std::stable_sort(all.begin(), all.end(), [](const Delivery& a, const Delivery& b) {
    if (a.recv != b.recv) return a.recv < b.recv;
    return a.gen > b.gen;
  });
  std::vector<Delivery> kept;
  kept.reserve(all.size());
  for (const auto& d : all)
    if (kept.empty() || d.gen > kept.back().gen) kept.push_back(d);
  return kept;
}

inline std::size_t obsolete_count(const AgeTrace& trace) {
  return delivered_count(trace) - effective_deliveries(trace).size();
}

/// Checks structural invariants. With `causal`, also requires recv >= gen,
/// which only holds when both clocks agree.
inline void validate(const AgeTrace& trace, bool causal = true) {
  for (std::size_t i = 1; i < trace.records.size(); ++i)
    if (trace.records[i].id <= trace.records[i - 1].id)
      throw ConfigError("record ids not strictly increasing at id " +
                        std::to_string(trace.records[i].id));
  if (trace.t_end < trace.t_start) throw RangeError("observation window ends before it starts");
  for (const auto& r : trace.records) {
    if (!r.recv_ts) continue;
    if (causal && *r.recv_ts < r.gen_ts)
      throw RangeError("packet " + std::to_string(r.id) + " received before generation");
    if (*r.recv_ts > trace.t_end || *r.recv_ts < trace.t_start)
      throw RangeError("packet " + std::to_string(r.id) + " received outside the window");
  }
}

}  // namespace aoi
