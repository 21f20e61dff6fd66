#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "aoi/age/bias.hpp"
#include "aoi/age/csv.hpp"
#include "aoi/age/penalty.hpp"
#include "aoi/age/stats.hpp"
#include "grid_oracle.hpp"
#include "random_trace.hpp"

namespace aoi {
namespace {

constexpr Nanos sec(double s) { return Nanos{static_cast<std::int64_t>(s * 1e9)}; }

AgeTrace make_trace(std::vector<std::pair<double, std::optional<double>>> stamps) {
  std::vector<PacketRecord> recs;
  std::uint64_t id = 0;
  for (auto [s, r] : stamps) {
    PacketRecord p{id++, sec(s), std::nullopt, 100};
    if (r) p.recv_ts = sec(*r);
    recs.push_back(p);
  }
  return AgeTrace::from_records(std::move(recs));
}

AgeTrace two_packet() { return make_trace({{0.0, 1.0}, {1.0, 2.0}}); }

AgeTrace periodic(std::size_t n, double period, double delay, double origin = 0.0) {
  std::vector<std::pair<double, std::optional<double>>> st;
  for (std::size_t i = 0; i < n; ++i) st.push_back({origin + i * period, origin + i * period + delay});
  return make_trace(st);
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

TEST(InstantaneousAge, GrowsFromInitialAgeBeforeFirstDelivery) {
  auto t = make_trace({{0.0, 1.0}});
  t.initial_age = Seconds{0.5};
  t.t_end = sec(2.0);
  EXPECT_DOUBLE_EQ(instantaneous_age(t, sec(0.5)).count(), 1.0);
  EXPECT_DOUBLE_EQ(instantaneous_age(t, sec(1.5)).count(), 1.5);
}

TEST(InstantaneousAge, DropsToSystemTimeAtDelivery) {
  const auto t = two_packet();
  EXPECT_DOUBLE_EQ(instantaneous_age(t, sec(2.0)).count(), 1.0);
  EXPECT_DOUBLE_EQ(instantaneous_age(t, sec(1.0)).count(), 1.0);
}

TEST(InstantaneousAge, OutsideWindowIsRangeError) {
  const auto t = two_packet();
  EXPECT_THROW(instantaneous_age(t, sec(2.5)), RangeError);
  EXPECT_THROW(instantaneous_age(t, Nanos{-1}), RangeError);
}

TEST(InstantaneousAge, SawtoothHasUnitSlopeAndDropsOnlyAtDeliveries) {
  sim::Rng rng{11};
  for (int k = 0; k < 20; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 30, .in_order = false});
    const auto d = effective_deliveries(t);
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
      // strictly inside an inter-delivery interval the slope is exactly one
      const Nanos a = d[i].recv, b = d[i + 1].recv - Nanos{1};
      if (b <= a) continue;
      EXPECT_NEAR(instantaneous_age(t, b).count() - instantaneous_age(t, a).count(), to_seconds(b - a), 1e-12);
      EXPECT_NEAR(instantaneous_age(t, d[i + 1].recv).count(), to_seconds(d[i + 1].recv - d[i + 1].gen), 1e-12);
    }
  }
}

TEST(AverageAge, TwoPacketHandComputation) {
  EXPECT_DOUBLE_EQ(average_age_q(two_packet()).count(), 1.5);
  EXPECT_DOUBLE_EQ(average_age_h(two_packet()).count(), 1.5);
}

TEST(AverageAge, PeriodicSteadyStateIsDelayPlusHalfPeriod) {
  const auto t = periodic(1000, 1.0, 0.5);
  EXPECT_NEAR(average_age_q(t).count(), 1.0, 1e-12);
  EXPECT_NEAR(average_age_h(t).count(), 1.0, 1e-12);
}

TEST(AverageAge, FewerThanTwoDeliveriesIsInsufficientData) {
  EXPECT_THROW(average_age_q(make_trace({{0.0, 1.0}})), InsufficientData);
  EXPECT_THROW(average_age_h(make_trace({{0.0, 1.0}, {1.0, std::nullopt}})), InsufficientData);
  EXPECT_THROW(peak_age(AgeTrace{}), InsufficientData);
  EXPECT_THROW(penalty_average(make_trace({{0.0, std::nullopt}}), {}), InsufficientData);
}

TEST(AverageAge, QFormEqualsHFormOnRandomTraces) {
  sim::Rng rng{2024};
  for (int k = 0; k < 200; ++k) {
    const auto t = testing::random_trace(
        rng, {.packets = 2 + rng.below(300), .max_delay_s = rng.uniform(0.01, 2.0), .loss = 0.1});
    const double q = average_age_q(t).count();
    EXPECT_LE(std::fabs(q - average_age_h(t).count()), 1e-9 * q);
  }
}

TEST(AverageAge, QFormEqualsHFormWithReordering) {
  sim::Rng rng{5};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 50, .max_delay_s = 1.0, .in_order = false});
    const double q = average_age_q(t).count();
    EXPECT_LE(std::fabs(q - average_age_h(t).count()), 1e-9 * q);
  }
}

TEST(AverageAge, MatchesGridIntegration) {
  sim::Rng rng{77};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(20), .quantum = Nanos{1000}});
    const double grid = testing::grid_time_average(t, [](double a) { return a; });
    EXPECT_LE(rel(average_age_q(t).count(), grid), 1e-6);
  }
}

TEST(AverageAge, ObsoletePacketsAreIgnored) {
  // packet 1 overtaken by packet 2; its late arrival cannot lower the age
  const auto with = make_trace({{0.0, 1.0}, {1.0, 3.5}, {2.0, 3.0}, {3.0, 4.0}});
  const auto without = make_trace({{0.0, 1.0}, {2.0, 3.0}, {3.0, 4.0}});
  EXPECT_EQ(obsolete_count(with), 1u);
  EXPECT_DOUBLE_EQ(average_age_h(with).count(), average_age_h(without).count());
  EXPECT_DOUBLE_EQ(peak_age(with).count(), peak_age(without).count());
}

TEST(AverageAge, LostPacketsCountedSeparately) {
  const auto t = make_trace({{0.0, 1.0}, {0.5, std::nullopt}, {1.0, 2.0}});
  EXPECT_EQ(loss_count(t), 1u);
  EXPECT_DOUBLE_EQ(average_age_h(t).count(), 1.5);
}

TEST(AverageAge, BoundedBelowByTimeWeightedSystemTime) {
  sim::Rng rng{8};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 40, .loss = 0.2, .in_order = false});
    const auto d = effective_deliveries(t);
    double weighted = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i)
      weighted += to_seconds(d[i].recv - d[i - 1].recv) * to_seconds(d[i - 1].recv - d[i - 1].gen);
    weighted /= to_seconds(d.back().recv - d.front().recv);
    EXPECT_GE(average_age(t).count(), weighted);
    EXPECT_GE(peak_age(t).count(), weighted);
  }
}

TEST(AverageAge, LongStationaryTraceBoundedByMeanSystemTime) {
  sim::Rng rng{31};
  const auto t = testing::random_trace(rng, {.packets = 20000, .max_delay_s = 0.5});
  EXPECT_GE(average_age(t).count(), mean_system_time(t).count());
}

TEST(PeakAge, HandComputedValues) {
  EXPECT_DOUBLE_EQ(peak_age(two_packet()).count(), 2.0);
  EXPECT_NEAR(peak_age(periodic(500, 1.0, 0.5)).count(), 1.5, 1e-12);
}

TEST(PeakAge, MatchesSamplePathMaxima) {
  sim::Rng rng{99};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(60), .loss = 0.1, .in_order = k % 2 == 0});
    const auto peaks = testing::brute_force_peaks(t);
    double mean = 0.0;
    for (double p : peaks) mean += p;
    mean /= static_cast<double>(peaks.size());
    EXPECT_LE(rel(peak_age(t).count(), mean), 1e-9);
  }
}

TEST(WindowAverage, FullWindowMatchesAverageAge) {
  sim::Rng rng{3};
  for (int k = 0; k < 50; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 30});
    const auto d = effective_deliveries(t);
    EXPECT_LE(rel(window_average_age(t, d.front().recv, d.back().recv).count(), average_age(t).count()), 1e-9);
  }
}

TEST(WindowAverage, IncludesInitialSegment) {
  auto t = make_trace({{0.0, 1.0}, {1.0, 2.0}});
  t.initial_age = Seconds{1.0};
  // age goes 1 -> 2 on [0,1], then 1 -> 2 on [1,2]
  EXPECT_DOUBLE_EQ(window_average_age(t, Nanos{0}, sec(2.0)).count(), 1.5);
}

TEST(Penalty, LinearIsAlphaTimesAverageAge) {
  const auto t = periodic(1000, 1.0, 0.5);
  EXPECT_NEAR(penalty_average(t, {PenaltyKind::linear, 2.0}), 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(penalty_average(two_packet(), {PenaltyKind::linear, 2.0}), 3.0);
  sim::Rng rng{4};
  for (int k = 0; k < 50; ++k) {
    const auto tr = testing::random_trace(rng, {.packets = 25});
    EXPECT_LE(rel(penalty_average(tr, {PenaltyKind::linear, 0.7}), 0.7 * average_age(tr).count()), 1e-12);
  }
}

TEST(Penalty, ExponentialSmallAlphaLimit) {
  const auto t = periodic(200, 1.0, 0.5);
  const double alpha = 1e-6;
  EXPECT_LE(rel(penalty_average(t, {PenaltyKind::exponential, alpha}), alpha * average_age(t).count()), 1e-4);
}

TEST(Penalty, LogarithmicMatchesGridIntegration) {
  sim::Rng rng{123};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(15), .quantum = Nanos{1000}});
    const double grid = testing::grid_time_average(t, [](double a) { return std::log(a + 1.0); });
    EXPECT_LE(rel(penalty_average(t, {PenaltyKind::logarithmic, 1.0}), grid), 1e-6);
  }
}

TEST(Penalty, InvalidSpecRejected) {
  EXPECT_THROW(penalty_average(two_packet(), {PenaltyKind::linear, 0.0}), ConfigError);
  EXPECT_THROW(penalty_average(two_packet(), {PenaltyKind::exponential, -1.0}), ConfigError);
  EXPECT_THROW(penalty_average(two_packet(), {static_cast<PenaltyKind>(9), 1.0}), ConfigError);
  EXPECT_THROW(parse_penalty_kind("quadratic"), ConfigError);
}

TEST(Bias, ZeroIsIdentity) {
  const auto t = two_packet();
  EXPECT_EQ(apply_bias(t, {}), t);
}

TEST(Bias, ShiftsAverageAgeByBias) {
  EXPECT_DOUBLE_EQ(average_age_h(apply_bias(two_packet(), {sec(1000.0)})).count(), 1001.5);
  const auto p = periodic(100, 1.0, 0.5, 1.0);
  EXPECT_NEAR(average_age(apply_bias(p, {sec(-0.2)})).count(), 0.8, 1e-12);
}

TEST(Bias, NegativeStampIsRangeError) {
  EXPECT_THROW(apply_bias(two_packet(), {sec(-1.5)}), RangeError);
}

TEST(Bias, ShiftTheoremForAverageAndPeak) {
  sim::Rng rng{42};
  for (int k = 0; k < 100; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(200), .loss = 0.05, .origin = sec(20.0)});
    for (double b : {-10.0, 0.0, 1.0, 1000.0}) {
      const auto biased = apply_bias(t, {sec(b)});
      EXPECT_LE(rel(average_age(biased).count(), average_age(t).count() + b), 1e-9);
      EXPECT_LE(rel(peak_age(biased).count(), peak_age(t).count() + b), 1e-9);
    }
  }
}

TEST(Bias, ArgminOverRateUnchangedByBias) {
  // periodic traces at several rates through a fixed delay plus a rate
  // dependent queueing term; the minimising rate is the same after a shift
  std::vector<double> rates{1, 2, 5, 10, 20, 50};
  auto best = [&](double b) {
    double best_rate = 0.0, best_age = 1e300;
    for (double r : rates) {
      const double delay = 0.05 + 0.002 * r * r;
      const auto t = apply_bias(periodic(400, 1.0 / r, delay, 5.0), {sec(b)});
      if (average_age(t).count() < best_age) best_age = average_age(t).count(), best_rate = r;
    }
    return best_rate;
  };
  EXPECT_EQ(best(0.0), best(3.0));
  EXPECT_EQ(best(0.0), best(-2.0));
}

TEST(PenaltyBias, LinearIsAlphaTimesBias) {
  sim::Rng rng{6};
  const auto t = testing::random_trace(rng, {.packets = 40});
  EXPECT_DOUBLE_EQ(penalty_bias(t, {sec(0.1)}, {PenaltyKind::linear, 3.0}), 3.0 * 0.1);
  EXPECT_DOUBLE_EQ(penalty_bias(two_packet(), {sec(0.1)}, {PenaltyKind::linear, 3.0}), 3.0 * 0.1);
}

TEST(PenaltyBias, ZeroBiasIsZero) {
  EXPECT_EQ(penalty_bias(two_packet(), {}, {PenaltyKind::exponential, 1.0}), 0.0);
  EXPECT_EQ(penalty_bias(two_packet(), {}, {PenaltyKind::logarithmic, 1.0}), 0.0);
}

TEST(PenaltyBias, ClosedFormsMatchDirectDifference) {
  sim::Rng rng{17};
  for (int k = 0; k < 50; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(40), .origin = sec(1.0)});
    for (auto kind : {PenaltyKind::exponential, PenaltyKind::logarithmic})
      for (double b : {0.05, -0.001, 0.7}) {
        const PenaltySpec p{kind, 0.5};
        const double direct = penalty_average(apply_bias(t, {sec(b)}), p) - penalty_average(t, p);
        EXPECT_LE(std::fabs(penalty_bias(t, {sec(b)}, p) - direct), 1e-9 * std::fabs(direct) + 1e-13);
      }
  }
}

TEST(PenaltyBias, ExponentialMatchesGridOracle) {
  sim::Rng rng{1234};
  for (int k = 0; k < 20; ++k) {
    const auto t = testing::random_trace(rng, {.packets = 2 + rng.below(10), .quantum = Nanos{1000}});
    const auto shifted = apply_bias(t, {sec(0.05)});
    auto f = [](double a) { return std::expm1(0.5 * a); };
    const double oracle = testing::grid_time_average(shifted, f) - testing::grid_time_average(t, f);
    EXPECT_LE(rel(penalty_bias(t, {sec(0.05)}, {PenaltyKind::exponential, 0.5}), oracle), 1e-6);
  }
}

TEST(PenaltyBias, LogOutsideDomainIsDomainError) {
  EXPECT_THROW(penalty_bias(two_packet(), {sec(-1.6)}, {PenaltyKind::logarithmic, 2.0}), DomainError);
}

TEST(TraceCsv, RoundTripPreservesRecords) {
  sim::Rng rng{9};
  const auto t = testing::random_trace(rng, {.packets = 100, .loss = 0.3});
  std::stringstream ss;
  write_trace_csv(ss, t);
  EXPECT_EQ(read_trace_csv(ss).records, t.records);
}

TEST(TraceCsv, MalformedRowsReportLineNumber) {
  std::stringstream bad{"id,gen_ns,recv_ns,size_bytes\n0,0,1000,10\n1,abc,2000,10\n"};
  try {
    read_trace_csv(bad);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string{e.what()}.find("line 3"), std::string::npos);
  }
  std::stringstream header{"id,gen,recv,size\n"};
  EXPECT_THROW(read_trace_csv(header), ConfigError);
  std::stringstream fields{"id,gen_ns,recv_ns,size_bytes\n0,0,1\n"};
  EXPECT_THROW(read_trace_csv(fields), ConfigError);
  std::stringstream order{"id,gen_ns,recv_ns,size_bytes\n1,0,1,1\n1,2,3,1\n"};
  EXPECT_THROW(read_trace_csv(order), ConfigError);
}

TEST(TraceCsv, EmptyRecvMeansLost) {
  std::stringstream ss{"id,gen_ns,recv_ns,size_bytes\n0,0,1000000000,1058\n1,500000000,,1058\n2,1000000000,2000000000,1058\n"};
  const auto t = read_trace_csv(ss);
  EXPECT_EQ(loss_count(t), 1u);
  EXPECT_DOUBLE_EQ(average_age(t).count(), 1.5);
}

TEST(Validate, DetectsNonCausalAndUnorderedRecords) {
  auto t = make_trace({{1.0, 0.5}, {2.0, 3.0}});
  EXPECT_THROW(validate(t), RangeError);
  EXPECT_NO_THROW(validate(t, false));
  t.records[1].id = 0;
  EXPECT_THROW(validate(t, false), ConfigError);
}

}  // namespace
}  // namespace aoi
