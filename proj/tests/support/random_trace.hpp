#pragma once

#include <algorithm>
#include <cstdint>

#include "aoi/age/trace.hpp"
#include "aoi/sim/rng.hpp"

namespace aoi::testing {

struct TraceShape {
  std::size_t packets = 10;
  double mean_gap_s = 0.1;    // between generations
  double max_delay_s = 0.3;   // system time drawn from (min_delay, max_delay)
  double min_delay_s = 0.001;
  double loss = 0.0;
  bool in_order = true;       // force receptions into generation order
  Nanos quantum{1};           // stamps are multiples of this
  Nanos origin{0};
};

inline Nanos quantize(double seconds, Nanos q) {
  const auto n = static_cast<std::int64_t>(seconds * 1e9 / static_cast<double>(q.count()));
  return q * std::max<std::int64_t>(n, 1);
}

/// Random trace with ids 0..n-1. At least the first and last packets are
/// delivered so every trace has >= 2 deliveries when packets >= 2.
inline AgeTrace random_trace(sim::Rng& rng, const TraceShape& shape) {
  std::vector<PacketRecord> recs;
  Nanos gen = shape.origin + quantize(rng.uniform(0.0, shape.mean_gap_s), shape.quantum);
  Nanos last_recv{0};
  for (std::size_t i = 0; i < shape.packets; ++i) {
    if (i > 0) gen += quantize(rng.exponential(1.0 / shape.mean_gap_s), shape.quantum);
    PacketRecord r{i, gen, std::nullopt, 100};
    const bool edge = i == 0 || i + 1 == shape.packets;
    if (edge || !rng.bernoulli(shape.loss)) {
      Nanos recv = gen + quantize(rng.uniform(shape.min_delay_s, shape.max_delay_s), shape.quantum);
      if (shape.in_order && recv <= last_recv) recv = last_recv + shape.quantum;
      last_recv = std::max(last_recv, recv);
      r.recv_ts = recv;
    }
    recs.push_back(r);
  }
  return AgeTrace::from_records(std::move(recs));
}

}  // namespace aoi::testing
