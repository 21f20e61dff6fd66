#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include "aoi/age/stats.hpp"
#include "aoi/sim/queue.hpp"

namespace aoi::sim {

struct SweepRow {
  double rate_hz = 0.0;
  double avg_age_s = std::numeric_limits<double>::quiet_NaN();
  double peak_age_s = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t loss = 0;
  double avg_delay_s = std::numeric_limits<double>::quiet_NaN();
};

inline SweepRow summarize(double rate_hz, const SimRun& run) {
  SweepRow row;
  row.rate_hz = rate_hz;
  row.loss = run.stats.losses();
  if (run.stats.delivered > 0) row.avg_delay_s = run.stats.avg_delay_s;
  if (effective_deliveries(run.trace).size() >= 2) {
    row.avg_age_s = average_age(run.trace).count();
    row.peak_age_s = peak_age(run.trace).count();
  }
  return row;
}

/// Runs `body(i)` for i in [0, n) on up to `threads` workers. Each index is
/// handled by exactly one worker; the first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = std::thread::hardware_concurrency()) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock{failure_mutex};
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

/// One fresh simulation per rate (empty buffers each time), same seed for
/// every point. Rows come back in the order of `rates`.
inline std::vector<SweepRow> sweep_rate(const SimConfig& templ, std::span<const double> rates) {
  if (rates.empty()) throw ConfigError("sweep needs at least one rate");
  check(templ);
  std::vector<SweepRow> rows(rates.size());
  parallel_for(rates.size(), [&](std::size_t i) {
    SimConfig cfg = templ;
    set_arrival_rate(cfg.arrival, rates[i]);
    rows[i] = summarize(rates[i], simulate(cfg));
  });
  return rows;
}

inline constexpr std::string_view kSweepCsvHeader = "rate_hz,avg_age_s,peak_age_s,loss,avg_delay_s";

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kSweepCsvHeader << '\n' << std::setprecision(12);
  for (const auto& r : rows)
    out << r.rate_hz << ',' << r.avg_age_s << ',' << r.peak_age_s << ',' << r.loss << ',' << r.avg_delay_s
        << '\n';
}

/// `count` rates evenly spaced on [lo, hi] (inclusive); one point gives lo.
inline std::vector<double> linear_rates(double lo, double hi, std::size_t count) {
  std::vector<double> r(count);
  for (std::size_t i = 0; i < count; ++i)
    r[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return r;
}

}  // namespace aoi::sim
