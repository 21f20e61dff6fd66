#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aoi/age/stats.hpp"
#include "aoi/sim/analytic.hpp"
#include "aoi/sim/event_queue.hpp"
#include "aoi/sim/queue.hpp"
#include "aoi/sim/scheduler.hpp"
#include "aoi/sim/sweep.hpp"

namespace aoi::sim {
namespace {

SimConfig mm1(double rho, std::uint64_t horizon, std::uint64_t seed = 42) {
  SimConfig c;
  c.arrival = PoissonArrivals{rho};
  c.service = ExponentialService{1.0};
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

TEST(EventQueue, OrdersByTimeThenInsertion) {
  EventQueue<int> q;
  q.push(Nanos{5}, 1);
  q.push(Nanos{3}, 2);
  q.push(Nanos{5}, 3);
  q.push(Nanos{3}, 4);
  std::vector<int> order;
  while (!q.empty()) order.push_back(q.pop().payload);
  EXPECT_EQ(order, (std::vector<int>{2, 4, 1, 3}));
}

TEST(Rng, SameSeedSameStream) {
  Rng a{7, 1}, b{7, 1}, c{7, 2};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(7, 1).next(), c.next());
}

TEST(Rng, ExponentialMeanAndUniformRange) {
  Rng r{1};
  double sum = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += r.exponential(4.0);
  }
  EXPECT_NEAR(sum / 200000, 0.25, 0.003);
}

TEST(Simulate, DeterministicNoQueueingAgeIsDelayPlusHalfPeriod) {
  SimConfig c;
  c.arrival = DeterministicArrivals{1.0};
  c.service = DeterministicService{2.0};
  c.horizon = 1000;
  const auto run = simulate(c);
  EXPECT_NEAR(average_age(run.trace).count(), 1.0, 1e-9);
  EXPECT_EQ(run.stats.delivered, 1000u);
  EXPECT_NEAR(run.stats.avg_delay_s, 0.5, 1e-9);
}

TEST(Simulate, MM1MatchesAnalyticAtOptimalLoad) {
  const auto run = simulate(mm1(0.53, 1'000'000));
  const double analytic = analytic_mm1_age(0.53, 1.0).count();
  EXPECT_LT(std::fabs(average_age(run.trace).count() - analytic) / analytic, 0.02);
}

TEST(Simulate, IdenticalSeedGivesIdenticalTrace) {
  const auto a = simulate(mm1(0.7, 20000, 5));
  const auto b = simulate(mm1(0.7, 20000, 5));
  const auto c = simulate(mm1(0.7, 20000, 6));
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_NE(a.trace, c.trace);
}

TEST(Simulate, FcfsDeliversInGenerationOrder) {
  const auto run = simulate(mm1(0.9, 20000));
  std::optional<Nanos> last;
  for (const auto& r : run.trace.records) {
    ASSERT_TRUE(r.recv_ts);
    if (last) ASSERT_GT(*r.recv_ts, *last);  // one server: completions never overlap
    ASSERT_GE(*r.recv_ts, r.gen_ts);
    last = r.recv_ts;
  }
}

TEST(Simulate, ConservationWithLossesAndBuffer) {
  for (bool drain : {true, false}) {
    SimConfig c = mm1(1.5, 5000, 3);
    c.buffer = 4;
    c.ingress_loss = 0.05;
    c.link_loss = 0.1;
    c.drain = drain;
    const auto run = simulate(c);
    const auto& s = run.stats;
    EXPECT_EQ(s.delivered + s.losses() + s.queued_at_end, s.arrivals);
    EXPECT_EQ(s.arrivals, 5000u);
    EXPECT_GT(s.dropped_buffer, 0u);
    EXPECT_EQ(delivered_count(run.trace), s.delivered);
    if (drain) EXPECT_EQ(s.queued_at_end, 0u);
  }
}

TEST(Simulate, Lcfs1DeliversFreshestAndHoldsOneWaiting) {
  SimConfig c;
  c.arrival = PoissonArrivals{5.0};
  c.service = DeterministicService{1.0};
  c.discipline = Discipline::lcfs1;
  c.horizon = 20000;
  const auto run = simulate(c);
  const auto& recs = run.trace.records;
  const Nanos service = from_seconds(1.0);
  for (const auto& r : recs) {
    if (!r.recv_ts) continue;
    const Nanos start = *r.recv_ts - service;
    // nothing newer than r had been generated when its service began
    auto newer = std::find_if(recs.begin() + static_cast<std::ptrdiff_t>(r.id) + 1, recs.end(),
                              [&](const PacketRecord& q) { return q.gen_ts < start; });
    ASSERT_EQ(newer, recs.end()) << "packet " << r.id;
  }
  EXPECT_GT(run.stats.superseded, 0u);
  EXPECT_EQ(run.stats.delivered + run.stats.losses(), run.stats.arrivals);
}

TEST(Simulate, Lcfs1AgeNonIncreasingInArrivalRate) {
  double previous = 1e300;
  for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    SimConfig c = mm1(lambda, 200000, 11);
    c.discipline = Discipline::lcfs1;
    const double age = average_age(simulate(c).trace).count();
    EXPECT_LE(age, previous * 1.005) << "lambda " << lambda;
    previous = std::min(previous, age);
  }
  // service-limited floor: one mean service time plus a little
  EXPECT_LT(previous, 2.2);
}

TEST(Simulate, UnstableFlagAndGrowingAge) {
  double previous = 0.0;
  for (std::uint64_t n : {1000u, 10000u, 100000u}) {
    const auto run = simulate(mm1(1.2, n, 9));
    EXPECT_TRUE(run.stats.unstable);
    const double age = average_age(run.trace).count();
    EXPECT_GT(age, previous);
    previous = age;
  }
  EXPECT_FALSE(simulate(mm1(0.5, 1000)).stats.unstable);
  auto bounded = mm1(1.2, 1000);
  bounded.buffer = 10;
  EXPECT_FALSE(simulate(bounded).stats.unstable);
}

TEST(Simulate, GenerateAtWillZeroWaitGivesOneAndAHalfServiceTimes) {
  SimConfig c;
  c.arrival = GenerateAtWill{[](const IdleView&) { return Nanos{0}; }};
  c.service = DeterministicService{4.0};
  c.horizon = 1000;
  const auto run = simulate(c);
  EXPECT_NEAR(average_age(run.trace).count(), 1.5 * 0.25, 1e-9);
  EXPECT_NEAR(run.stats.mean_in_system, 1.0, 1e-9);
}

TEST(Simulate, InvalidConfigRejected) {
  SimConfig c;
  c.arrival = PoissonArrivals{0.0};
  EXPECT_THROW(simulate(c), ConfigError);
  c = mm1(0.5, 10);
  c.link_loss = 1.0;
  EXPECT_THROW(simulate(c), ConfigError);
  c = mm1(0.5, 0);
  EXPECT_THROW(simulate(c), ConfigError);
  c = mm1(0.5, 10);
  c.arrival = GenerateAtWill{};
  EXPECT_THROW(simulate(c), ConfigError);
}

TEST(Simulate, MetadataSidecarEchoesConfigAndCounts) {
  SimConfig c = mm1(1.2, 100, 77);
  const auto run = simulate(c);
  std::ostringstream os;
  write_metadata(os, c, run.stats);
  const auto text = os.str();
  EXPECT_NE(text.find("seed=77\n"), std::string::npos);
  EXPECT_NE(text.find("unstable=1\n"), std::string::npos);
  EXPECT_NE(text.find("arrival=poisson:1.2\n"), std::string::npos);
  EXPECT_NE(text.find("loss=0\n"), std::string::npos);
}

TEST(Analytic, MM1ClosedForm) {
  EXPECT_DOUBLE_EQ(analytic_mm1_age(0.5, 1.0).count(), 3.5);
  EXPECT_DOUBLE_EQ(analytic_mm1_age(0.5, 2.0).count(), 1.75);
  EXPECT_THROW(analytic_mm1_age(1.0, 1.0), DomainError);
  EXPECT_THROW(analytic_mm1_age(0.0, 1.0), DomainError);
}

TEST(Analytic, OptimalLoadAndOccupancy) {
  const double rho = mm1_optimal_load();
  EXPECT_NEAR(rho, 0.53, 0.005);
  EXPECT_NEAR(analytic_mm1_in_system(rho), 1.13, 0.01);
}

TEST(Analytic, SimulationAgreesAcrossLoads) {
  for (double rho : {0.3, 0.8}) {
    const auto run = simulate(mm1(rho, 1'000'000, 42));
    const double analytic = analytic_mm1_age(rho, 1.0).count();
    EXPECT_LT(std::fabs(average_age(run.trace).count() - analytic) / analytic, 0.02) << rho;
  }
}

SimConfig bottleneck(Discipline d) {
  // 130 kbit/s link, 1058-byte updates: capacity about 15.4 packets/s
  SimConfig c;
  c.arrival = DeterministicArrivals{1.0};
  c.service = DeterministicService{130000.0 / (1058 * 8)};
  c.discipline = d;
  c.horizon = 2000;
  return c;
}

TEST(Sweep, SingleRateEqualsSimulate) {
  const std::vector<double> rates{0.7};
  const auto rows = sweep_rate(mm1(0.5, 5000), rates);
  ASSERT_EQ(rows.size(), 1u);
  const auto direct = simulate(mm1(0.7, 5000));
  EXPECT_DOUBLE_EQ(rows[0].avg_age_s, average_age(direct.trace).count());
  EXPECT_DOUBLE_EQ(rows[0].peak_age_s, peak_age(direct.trace).count());
  EXPECT_EQ(rows[0].loss, direct.stats.losses());
}

TEST(Sweep, FcfsBottleneckIsUShaped) {
  const double capacity = 130000.0 / (1058 * 8);
  const auto rates = linear_rates(0.1 * capacity, 3.0 * capacity, 12);
  const auto rows = sweep_rate(bottleneck(Discipline::fcfs), rates);
  const auto best = std::min_element(rows.begin(), rows.end(),
                                     [](const auto& a, const auto& b) { return a.avg_age_s < b.avg_age_s; });
  EXPECT_NE(best, rows.begin());
  EXPECT_NE(best, rows.end() - 1);
  EXPECT_GT(rows.front().avg_age_s, best->avg_age_s);
  EXPECT_GT(rows.back().avg_age_s, best->avg_age_s);
}

TEST(Sweep, Lcfs1HasNoHighRateBlowUp) {
  const double capacity = 130000.0 / (1058 * 8);
  const auto rates = linear_rates(0.1 * capacity, 3.0 * capacity, 12);
  const auto fcfs = sweep_rate(bottleneck(Discipline::fcfs), rates);
  const auto lcfs = sweep_rate(bottleneck(Discipline::lcfs1), rates);
  EXPECT_LE(lcfs.back().avg_age_s, fcfs.back().avg_age_s);
  const double lcfs_min = std::min_element(lcfs.begin(), lcfs.end(), [](auto& a, auto& b) {
                            return a.avg_age_s < b.avg_age_s;
                          })->avg_age_s;
  EXPECT_LT(lcfs.back().avg_age_s, 2.0 * lcfs_min);
}

TEST(Sweep, CsvHeaderAndRowCount) {
  const std::vector<double> rates{0.2, 0.4};
  std::ostringstream os;
  write_sweep_csv(os, sweep_rate(mm1(0.5, 200), rates));
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("rate_hz,avg_age_s,peak_age_s,loss,avg_delay_s\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(ChannelModel, RegimesAreOrderedLossBeforeDelay) {
  ChannelModel ch;
  ch.bandwidth_bps = 1e6;
  ch.packet_bytes = 1250;  // 10 ms per packet, capacity 100/s
  double first_loss = -1, first_delay = -1;
  for (double rate = 1; rate <= 200; rate += 1) {
    const double load = ch.offered_load(rate);
    if (first_loss < 0 && ch.loss_probability(load) > 0) first_loss = rate;
    if (first_delay < 0 && ch.queueing_delay(load).count() > 0) first_delay = rate;
  }
  EXPECT_GT(first_loss, 0);
  EXPECT_GT(first_delay, first_loss);
  EXPECT_EQ(ch.regime(0.1), Regime::relaxed);
  EXPECT_EQ(ch.regime(0.7), Regime::busy);
  EXPECT_EQ(ch.regime(0.95), Regime::panicked);
  // delay saturates instead of growing without bound
  EXPECT_EQ(ch.queueing_delay(5.0), ch.queueing_delay(50.0));
  ChannelModel bad;
  bad.loss_onset = 0.9;
  bad.delay_onset = 0.5;
  EXPECT_THROW(bad.check(), ConfigError);
}

TEST(ChannelModel, DatagramSweepShowsLossBeforeDelayAndNoBlowUp) {
  SimConfig c;
  c.arrival = DeterministicArrivals{1.0};
  c.service = DeterministicService{1e9};
  c.channel = ChannelModel{};
  c.channel->base_rtt = from_seconds(0.02);
  c.channel->bandwidth_bps = 1e6;
  c.channel->packet_bytes = 1250;
  c.horizon = 3000;
  const auto rows = sweep_rate(c, linear_rates(10, 300, 30));
  std::optional<double> loss_rate, delay_rate;
  for (const auto& r : rows) {
    if (!loss_rate && r.loss > 0) loss_rate = r.rate_hz;
    if (!delay_rate && r.avg_delay_s > rows.front().avg_delay_s + 1e-6) delay_rate = r.rate_hz;
  }
  ASSERT_TRUE(loss_rate && delay_rate);
  EXPECT_LT(*loss_rate, *delay_rate);
  EXPECT_LT(rows.back().avg_age_s, 10 * rows.front().avg_age_s);
}

TEST(ChannelModel, RetransmittingPresetAgesSteadilyWithRate) {
  SimConfig c;
  c.arrival = DeterministicArrivals{1.0};
  c.service = DeterministicService{1e9};
  c.channel = ChannelModel{};
  c.channel->retransmit = true;
  c.channel->bandwidth_bps = 1e6;
  c.channel->packet_bytes = 1250;
  c.horizon = 3000;
  const auto rows = sweep_rate(c, std::vector<double>{20, 60, 80, 95});
  EXPECT_GT(rows.back().avg_age_s, 3 * rows[1].avg_age_s);
  EXPECT_EQ(rows.back().loss, 0u);
}

TEST(Scheduler, SingleReliableSourceIsPeriodicSawtooth) {
  SchedulerConfig cfg{{1.0}, from_seconds(0.01), PollPolicy::round_robin};
  const auto run = simulate_scheduler(cfg, 1000, 1);
  EXPECT_NEAR(run.total_average_age().count(), 0.015, 1e-12);
}

TEST(Scheduler, SymmetricPoliciesAgree) {
  SchedulerConfig cfg{{0.95, 0.95, 0.95, 0.95}, from_seconds(1e-3)};
  std::vector<double> totals;
  for (auto policy : {PollPolicy::round_robin, PollPolicy::greedy, PollPolicy::max_weight}) {
    cfg.policy = policy;
    totals.push_back(simulate_scheduler(cfg, 100000, 3).total_average_age().count());
  }
  const auto [lo, hi] = std::minmax_element(totals.begin(), totals.end());
  EXPECT_LT(*hi / *lo, 1.05);
}

TEST(Scheduler, MaxWeightBeatsRoundRobinOnAsymmetricChannels) {
  SchedulerConfig mw{{0.9, 0.9, 0.3, 0.3}, from_seconds(1e-3), PollPolicy::max_weight};
  SchedulerConfig rr = mw;
  rr.policy = PollPolicy::round_robin;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    EXPECT_LT(simulate_scheduler(mw, 100000, seed).total_average_age().count(),
              simulate_scheduler(rr, 100000, seed).total_average_age().count());
}

TEST(Scheduler, RoundRobinPollsEveryone) {
  SchedulerConfig cfg{{0.5, 1.0, 0.2}, from_seconds(1e-3)};
  const auto run = simulate_scheduler(cfg, 3000, 1);
  EXPECT_EQ(run.polls, (std::vector<std::uint64_t>{1000, 1000, 1000}));
}

TEST(Scheduler, DeterministicPerSeedAndValidated) {
  SchedulerConfig cfg{{0.6, 0.4}, from_seconds(1e-3), PollPolicy::greedy};
  EXPECT_EQ(simulate_scheduler(cfg, 1000, 4).per_source, simulate_scheduler(cfg, 1000, 4).per_source);
  cfg.success_prob = {0.0};
  EXPECT_THROW(simulate_scheduler(cfg, 10, 1), ConfigError);
}

}  // namespace
}  // namespace aoi::sim
