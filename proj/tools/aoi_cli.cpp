#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aoi/age/bias.hpp"
#include "aoi/age/csv.hpp"
#include "aoi/age/penalty.hpp"
#include "aoi/age/stats.hpp"
#include "aoi/net/closed_loop.hpp"
#include "aoi/net/emulated.hpp"
#include "aoi/net/offset.hpp"
#include "aoi/net/sampler.hpp"
#include "aoi/net/udp.hpp"
#include "aoi/policy/config.hpp"
#include "aoi/policy/qlearning.hpp"
#include "aoi/sim/analytic.hpp"
#include "aoi/sim/queue.hpp"
#include "aoi/sim/sweep.hpp"

#ifndef AOI_VERSION
#define AOI_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Writes through a temporary sibling and renames, so readers never see a
// half-written file.
void write_atomically(const std::string& path, const std::function<void(std::ostream&)>& body) {
  const fs::path target{path};
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out{tmp, std::ios::binary | std::ios::trunc};
    if (!out) throw aoi::ConfigError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw aoi::ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

struct Run {
  std::string subcommand;
  std::vector<std::string> argv;
  std::string started = utc_now();
  std::uint64_t seed = 0;
  json config = json::object();
  std::vector<std::string> outputs;

  void output(const std::string& path) { outputs.push_back(path); }

  void write_manifest() const {
    if (outputs.empty()) return;
    json m;
    m["subcommand"] = subcommand;
    m["argv"] = argv;
    m["config"] = config;
    m["seed"] = seed;
    m["tool_version"] = AOI_VERSION;
    m["outputs"] = outputs;
    m["started_utc"] = started;
    m["finished_utc"] = utc_now();
    write_atomically(outputs.front() + ".manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
  }
};

json options_json(const CLI::App& app) {
  json cfg = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t given) {
  if (flag->count() > 0) return given;
  if (const char* env = std::getenv("AOI_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::strlen(env)) return v;
    } catch (const std::exception&) {
    }
    throw aoi::ConfigError(std::string("AOI_SEED is not an unsigned integer: ") + env);
  }
  return given;
}

// "LO:HI:N"
std::vector<double> parse_grid(const std::string& text) {
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) throw aoi::ConfigError("grid must be LO:HI:N, got " + text);
  try {
    const double lo = std::stod(text.substr(0, a));
    const double hi = std::stod(text.substr(a + 1, b - a - 1));
    const long n = std::stol(text.substr(b + 1));
    if (n < 1 || !(hi >= lo)) throw aoi::ConfigError("");
    return aoi::sim::linear_rates(lo, hi, static_cast<std::size_t>(n));
  } catch (const std::exception&) {
    throw aoi::ConfigError("grid must be LO:HI:N with LO <= HI and N >= 1, got " + text);
  }
}

void fmt(std::ostream& os, const char* key, double v) { os << key << '=' << std::setprecision(10) << v << '\n'; }

// ---------------------------------------------------------------- models

struct ModelFlags {
  std::string model = "mm1";
  double rho = 0.5;
  double mu = 1.0;
  double rate = 0.0;
  bool zero_wait = false;
  std::string discipline = "fcfs";
  long buffer = -1;
  double ingress_loss = 0.0;
  double link_loss = 0.0;
  std::string propagation = "0";
  double bottleneck_bps = 0.0;
  std::uint32_t packet_bytes = 1058;
  bool channel = false;
  std::string base_rtt = "0";
  bool retransmit = false;
  std::uint64_t arrivals = 1000000;
  bool no_drain = false;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "Queue model: mm1, md1, dm1, dd1")->capture_default_str();
    app->add_option("--rho", rho, "Offered load lambda/mu")->capture_default_str();
    app->add_option("--mu", mu, "Service rate in Hz")->capture_default_str();
    app->add_option("--rate", rate, "Arrival rate in Hz (overrides --rho)");
    app->add_flag("--zero-wait", zero_wait, "Generate a new update whenever the server goes idle");
    app->add_option("--discipline", discipline, "fcfs or lcfs1")->capture_default_str();
    app->add_option("--buffer", buffer, "Waiting slots; omit for unbounded");
    app->add_option("--ingress-loss", ingress_loss, "Drop probability before the queue")->capture_default_str();
    app->add_option("--link-loss", link_loss, "Drop probability after service")->capture_default_str();
    app->add_option("--propagation", propagation, "Delay added to every delivery, e.g. 20ms")->capture_default_str();
    app->add_option("--bottleneck-bps", bottleneck_bps, "Serve at link speed: packet_bytes*8/bps per packet");
    app->add_option("--packet-bytes", packet_bytes, "Update size on the link")->capture_default_str();
    app->add_flag("--channel", channel, "Apply the relaxed/busy/panicked load regimes of the bottleneck");
    app->add_option("--base-rtt", base_rtt, "Base round-trip time of the channel model")->capture_default_str();
    app->add_flag("--retransmit", retransmit, "Channel resends lost packets after a timeout");
    app->add_option("--arrivals", arrivals, "Number of generated updates")->capture_default_str();
    app->add_flag("--no-drain", no_drain, "Stop at the last arrival instead of emptying the queue");
    seed_opt = app->add_option("--seed", seed, "RNG seed (default: $AOI_SEED, else 1)");
  }

  aoi::sim::SimConfig build(std::uint64_t effective_seed) const {
    using namespace aoi::sim;
    if (model.size() != 3 || model[2] != '1' || (model[0] != 'm' && model[0] != 'd') ||
        (model[1] != 'm' && model[1] != 'd'))
      throw aoi::ConfigError("unknown model " + model + " (expected mm1, md1, dm1 or dd1)");
    SimConfig c;
    double service_hz = mu;
    if (bottleneck_bps > 0.0) service_hz = bottleneck_bps / (packet_bytes * 8.0);
    if (!(service_hz > 0.0)) throw aoi::ConfigError("service rate must be positive");
    const double lambda = rate > 0.0 ? rate : rho * service_hz;
    if (zero_wait)
      c.arrival = GenerateAtWill{[](const IdleView&) { return aoi::Nanos{0}; }};
    else if (model[0] == 'm')
      c.arrival = PoissonArrivals{lambda};
    else
      c.arrival = DeterministicArrivals{lambda};
    if (model[1] == 'm')
      c.service = ExponentialService{service_hz};
    else
      c.service = DeterministicService{service_hz};
    c.discipline = parse_discipline(discipline);
    if (buffer >= 0) c.buffer = static_cast<std::size_t>(buffer);
    c.ingress_loss = ingress_loss;
    c.link_loss = link_loss;
    c.propagation = aoi::parse_duration(propagation);
    if (channel) {
      ChannelModel ch;
      if (bottleneck_bps > 0.0) ch.bandwidth_bps = bottleneck_bps;
      ch.packet_bytes = packet_bytes;
      ch.base_rtt = aoi::parse_duration(base_rtt);
      ch.retransmit = retransmit;
      c.channel = ch;
    }
    c.horizon = arrivals;
    c.seed = effective_seed;
    c.drain = !no_drain;
    c.packet_bytes = packet_bytes;
    check(c);
    return c;
  }
};

void print_age_summary(std::ostream& os, const aoi::AgeTrace& trace) {
  os << "records=" << trace.records.size() << '\n';
  os << "delivered=" << aoi::delivered_count(trace) << '\n';
  if (aoi::effective_deliveries(trace).size() < 2) {
    os << "avg_age_s=nan\npeak_age_s=nan\n";
    return;
  }
  fmt(os, "avg_age_s", aoi::average_age(trace).count());
  fmt(os, "peak_age_s", aoi::peak_age(trace).count());
}

// ---------------------------------------------------------------- sim

struct SimCmd {
  ModelFlags m;
  std::string out;
  bool hints = false;

  void attach(CLI::App* app) {
    m.attach(app);
    app->add_option("--out", out, "Trace CSV path")->required();
    app->add_flag("--gnuplot-hints", hints, "Print suggested plot commands");
  }

  int run(Run& r) {
    r.seed = resolve_seed(m.seed_opt, m.seed);
    const auto cfg = m.build(r.seed);
    const auto result = aoi::sim::simulate(cfg);
    write_atomically(out, [&](std::ostream& os) { aoi::write_trace_csv(os, result.trace); });
    r.output(out);
    write_atomically(out + ".meta", [&](std::ostream& os) { aoi::sim::write_metadata(os, cfg, result.stats); });
    r.output(out + ".meta");
    print_age_summary(std::cout, result.trace);
    std::cout << "unstable=" << (result.stats.unstable ? 1 : 0) << '\n';
    fmt(std::cout, "mean_in_system", result.stats.mean_in_system);
    if (const auto rho = aoi::sim::offered_load(cfg);
        rho && *rho > 0.0 && *rho < 1.0 && m.model == "mm1" && !m.zero_wait && !cfg.channel)
      fmt(std::cout, "analytic_avg_age_s", aoi::sim::analytic_mm1_age(*rho, aoi::sim::service_rate(cfg.service)).count());
    if (hints)
      std::cout << "# gnuplot: set datafile separator ','; plot '" << out
                << "' every ::1 using ($2/1e9):(($3-$2)/1e9) with points title 'system time'\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- sweep

struct SweepCmd {
  ModelFlags m;
  std::string rates;
  std::string rhos;
  std::string out;
  bool hints = false;

  void attach(CLI::App* app) {
    m.attach(app);
    m.arrivals = 100000;
    app->add_option("--rates", rates, "Arrival rates LO:HI:N in Hz");
    app->add_option("--rhos", rhos, "Offered loads LO:HI:N (times the service rate)");
    app->add_option("--out", out, "Sweep CSV path")->required();
    app->add_flag("--gnuplot-hints", hints, "Print suggested plot commands");
  }

  int run(Run& r) {
    r.seed = resolve_seed(m.seed_opt, m.seed);
    if (rates.empty() == rhos.empty()) throw aoi::ConfigError("give exactly one of --rates or --rhos");
    const auto templ = m.build(r.seed);
    if (m.zero_wait) throw aoi::ConfigError("a rate sweep needs a rate-driven arrival process");
    std::vector<double> grid;
    if (!rates.empty()) {
      grid = parse_grid(rates);
    } else {
      const double mu = aoi::sim::service_rate(templ.service);
      for (double x : parse_grid(rhos)) grid.push_back(x * mu);
    }
    const auto rows = aoi::sim::sweep_rate(templ, grid);
    write_atomically(out, [&](std::ostream& os) { aoi::sim::write_sweep_csv(os, rows); });
    r.output(out);
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].avg_age_s < rows[best].avg_age_s) best = i;
    std::cout << "points=" << rows.size() << '\n';
    fmt(std::cout, "best_rate_hz", rows[best].rate_hz);
    fmt(std::cout, "best_avg_age_s", rows[best].avg_age_s);
    if (hints)
      std::cout << "# gnuplot: set datafile separator ','; set logscale y; plot '" << out
                << "' every ::1 using 1:2 with linespoints title 'average age', '' every ::1 using 1:3 with "
                   "linespoints title 'peak age'\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- analyze

struct AnalyzeCmd {
  std::string path;
  std::string penalty = "linear";
  double alpha = 1.0;
  double bias_s = 0.0;

  void attach(CLI::App* app) {
    app->add_option("trace", path, "Trace CSV")->required();
    app->add_option("--penalty", penalty, "linear, exponential or logarithmic")->capture_default_str();
    app->add_option("--alpha", alpha, "Penalty parameter")->capture_default_str();
    app->add_option("--bias", bias_s, "Receiver clock bias in seconds applied before analysis")->capture_default_str();
  }

  int run(Run&) {
    auto trace = aoi::read_trace_csv(path);
    const aoi::PenaltySpec spec{aoi::parse_penalty_kind(penalty), alpha};
    spec.check();
    if (bias_s != 0.0) trace = aoi::apply_bias(trace, aoi::BiasModel{aoi::from_seconds(bias_s)});
    auto& os = std::cout;
    os << "records=" << trace.records.size() << '\n';
    os << "delivered=" << aoi::delivered_count(trace) << '\n';
    os << "lost=" << aoi::loss_count(trace) << '\n';
    os << "obsolete=" << aoi::obsolete_count(trace) << '\n';
    fmt(os, "avg_age_q_s", aoi::average_age_q(trace).count());
    fmt(os, "avg_age_h_s", aoi::average_age_h(trace).count());
    fmt(os, "peak_age_s", aoi::peak_age(trace).count());
    fmt(os, "mean_system_time_s", aoi::mean_system_time(trace).count());
    os << "penalty=" << aoi::to_string(spec.kind) << '\n';
    fmt(os, "penalty_avg", aoi::penalty_average(trace, spec));
    return kExitOk;
  }
};

// ---------------------------------------------------------------- measure

struct Endpoint {
  std::string dest = "127.0.0.1";
  std::uint16_t port = 9000;
  std::string emulated;

  void attach(CLI::App* app) {
    app->add_option("--dest", dest, "Echo server host")->capture_default_str();
    app->add_option("--port", port, "Echo server UDP port")->capture_default_str();
    app->add_option("--emulated", emulated, "In-process channel spec, e.g. fixed_rtt=12.5ms");
  }
};

struct EchoServerCmd {
  std::string bind = "0.0.0.0";
  std::uint16_t port = 9000;
  double duration_s = 0.0;

  void attach(CLI::App* app) {
    app->add_option("--bind", bind, "Address to bind")->capture_default_str();
    app->add_option("--port", port, "UDP port; 0 picks a free one")->capture_default_str();
    app->add_option("--duration", duration_s, "Stop after this many seconds (default: until signalled)");
  }

  int run(Run&) {
    aoi::net::EchoServer server{bind, port};
    std::cout << "port=" << server.port() << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.start(&std::cout);
    const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration_s);
    while (!g_interrupted && (duration_s <= 0.0 || std::chrono::steady_clock::now() < until))
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    std::cout << aoi::net::format_counters(server.counters()) << std::endl;
    return kExitOk;
  }
};

struct SamplerCmd {
  Endpoint ep;
  double rate = 100.0;
  std::string duration = "10s";
  std::string schedule;
  std::size_t size = aoi::net::kDefaultDatagramBytes;
  std::string out;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    ep.attach(app);
    app->add_option("--rate", rate, "Packets per second")->capture_default_str();
    app->add_option("--duration", duration, "Run length, e.g. 30s or bare seconds")->capture_default_str();
    app->add_option("--schedule", schedule, "Piecewise rates RATE:DUR,RATE:DUR (overrides --rate)");
    app->add_option("--size", size, "Datagram size in bytes")->capture_default_str();
    app->add_option("--out", out, "Trace CSV path")->required();
    seed_opt = app->add_option("--seed", seed, "Emulated channel seed (default: $AOI_SEED, else 1)");
  }

  int run(Run& r) {
    r.seed = resolve_seed(seed_opt, seed);
    const auto sched = schedule.empty() ? aoi::net::RateSchedule{{rate, aoi::parse_duration(duration)}}
                                        : aoi::net::parse_schedule(schedule);
    aoi::net::check_schedule(sched);
    aoi::AgeTrace trace;
    std::uint64_t sent = 0, echoed = 0, unmatched = 0, duplicates = 0;
    std::optional<std::string> error;
    if (!ep.emulated.empty()) {
      aoi::net::EmulatedEchoPath path{aoi::net::parse_emulated_spec(ep.emulated), r.seed};
      auto run = aoi::net::sample_emulated(path, sched, size);
      trace = std::move(run.trace);
      sent = run.sent, echoed = run.echoed, unmatched = run.unmatched, duplicates = run.duplicates;
    } else {
      auto run = aoi::net::run_udp_sampler(ep.dest, ep.port, sched, size);
      trace = std::move(run.trace);
      sent = run.sent, echoed = run.echoed, unmatched = run.unmatched, duplicates = run.duplicates;
      error = run.error;
    }
    write_atomically(out, [&](std::ostream& os) { aoi::write_trace_csv(os, trace); });
    r.output(out);
    std::cout << "sent=" << sent << "\nechoed=" << echoed << "\nunmatched=" << unmatched
              << "\nduplicates=" << duplicates << '\n';
    fmt(std::cout, "echo_ratio", sent ? static_cast<double>(echoed) / static_cast<double>(sent) : 0.0);
    if (aoi::effective_deliveries(trace).size() >= 2) fmt(std::cout, "avg_age_s", aoi::average_age(trace).count());
    if (error) throw aoi::NetworkError(*error + " (partial trace written)");
    return kExitOk;
  }
};

struct SyncCmd {
  Endpoint ep;
  std::size_t pings = 100;
  std::string timeout = "1s";
  unsigned retries = 3;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    ep.attach(app);
    app->add_option("--pings", pings, "Time-request exchanges (at least 10)")->capture_default_str();
    app->add_option("--timeout", timeout, "Per-ping timeout")->capture_default_str();
    app->add_option("--retries", retries, "Retries per ping")->capture_default_str();
    seed_opt = app->add_option("--seed", seed, "Emulated channel seed (default: $AOI_SEED, else 1)");
  }

  int run(Run& r) {
    r.seed = resolve_seed(seed_opt, seed);
    aoi::net::SyncOptions opt;
    opt.pings = pings;
    opt.timeout = aoi::parse_duration(timeout);
    opt.retries = retries;
    aoi::net::OffsetEstimate e;
    if (!ep.emulated.empty()) {
      aoi::net::EmulatedEchoPath path{aoi::net::parse_emulated_spec(ep.emulated), r.seed};
      e = aoi::net::estimate_offset(path, opt);
    } else {
      e = aoi::net::estimate_offset(ep.dest, ep.port, opt);
    }
    double mean_rtt = 0.0;
    for (double x : e.rtt_samples) mean_rtt += x / static_cast<double>(e.rtt_samples.size());
    std::cout << "pings=" << e.rtt_samples.size() << "\noffset_ns=" << e.offset_ns << '\n';
    fmt(std::cout, "offset_ms", static_cast<double>(e.offset_ns) * 1e-6);
    fmt(std::cout, "confidence_s", e.confidence);
    fmt(std::cout, "mean_rtt_s", mean_rtt);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- policy

struct PolicyCmd {
  std::string name = "lazy";
  std::string emulated = "fixed_rtt=100ms";
  std::string config_path;
  std::string duration = "60s";
  std::string warmup = "5s";
  double rate = 10.0;
  std::uint64_t iters = 10000;
  std::string log_path;
  std::string out;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--name", name, "fixed, zero-wait, lazy, acp or qlearn")->capture_default_str();
    app->add_option("--emulated", emulated, "Channel spec")->capture_default_str();
    app->add_option("--config", config_path, "Policy key=value file (overrides flags)");
    app->add_option("--duration", duration, "Closed-loop run length")->capture_default_str();
    app->add_option("--warmup", warmup, "Excluded from steady-state statistics")->capture_default_str();
    app->add_option("--rate", rate, "Rate for the fixed policy")->capture_default_str();
    app->add_option("--iters", iters, "Q-learning iterations")->capture_default_str();
    app->add_option("--log", log_path, "Decision log CSV (Q table for qlearn)");
    app->add_option("--out", out, "Trace CSV path");
    seed_opt = app->add_option("--seed", seed, "RNG seed (default: $AOI_SEED, else 1)");
  }

  int run(Run& r) {
    r.seed = resolve_seed(seed_opt, seed);
    aoi::policy::PolicyConfig pcfg;
    if (!config_path.empty()) pcfg = aoi::policy::load_policy_config(config_path);
    const auto spec = aoi::net::parse_emulated_spec(emulated);
    if (name == "qlearn") return run_qlearn(r, pcfg, spec);

    aoi::net::LoopConfig cfg;
    cfg.policy = aoi::net::parse_loop_policy(name);
    cfg.fixed_rate_hz = rate;
    cfg.duration = aoi::parse_duration(duration);
    cfg.warmup = aoi::parse_duration(warmup);
    cfg.acp = pcfg.acp;
    cfg.ewma_alpha = pcfg.ewma_alpha;
    aoi::net::EmulatedEchoPath path{spec, r.seed};
    const auto run = aoi::net::run_closed_loop(path, cfg);
    if (!log_path.empty()) {
      write_atomically(log_path, [&](std::ostream& os) { aoi::policy::write_decision_log(os, run.decisions); });
      r.output(log_path);
    }
    if (!out.empty()) {
      write_atomically(out, [&](std::ostream& os) { aoi::write_trace_csv(os, run.trace); });
      r.output(out);
    }
    std::cout << "policy=" << aoi::net::to_string(cfg.policy) << "\nsent=" << run.sent << "\nacked=" << run.acked
              << "\nepochs=" << run.decisions.size() << '\n';
    fmt(std::cout, "mean_rate_hz", run.mean_rate_hz);
    fmt(std::cout, "mean_in_flight", run.mean_in_flight);
    if (aoi::effective_deliveries(run.truth).size() >= 2)
      fmt(std::cout, "avg_age_s", aoi::average_age(run.truth).count());
    if (aoi::effective_deliveries(run.trace).size() >= 2)
      fmt(std::cout, "rtt_age_estimate_s", aoi::net::rtt_age_bound(run.trace).count());
    if (spec.forward.capacity_step) {
      const auto n = aoi::net::epochs_to_reduced_capacity(run, spec, cfg.datagram_bytes);
      std::cout << "epochs_to_reduced_capacity=" << (n ? std::to_string(*n) : "never") << '\n';
    }
    return kExitOk;
  }

  int run_qlearn(Run& r, const aoi::policy::PolicyConfig& pcfg, const aoi::net::EmulatedSpec& spec) {
    using namespace aoi::policy;
    if (spec.forward.delay.kind != aoi::net::DelaySpec::Kind::fixed || spec.forward.bandwidth_bps)
      throw aoi::ConfigError("qlearn runs on an unlimited-bandwidth fixed-delay channel, e.g. fixed_delay=1s");
    const double delay = aoi::to_seconds(spec.forward.delay.fixed + spec.backward.delay.mean());
    QAgent agent{pcfg.q};
    FixedDelayEnv env{delay};
    aoi::sim::Rng rng{r.seed, 7};
    const auto rep = train(agent, env, iters, rng);
    const std::size_t steady = agent.bin(delay);
    if (!log_path.empty()) {
      write_atomically(log_path, [&](std::ostream& os) {
        os << "bin,lo_s,hi_s,q_pause,q_resume,visits_pause,visits_resume\n" << std::setprecision(9);
        for (std::size_t b = 0; b < agent.bin_count(); ++b)
          if (agent.visited(b))
            os << b << ',' << agent.edges()[b] << ',' << agent.edges()[b + 1] << ',' << agent.q(b, QAction::pause)
               << ',' << agent.q(b, QAction::resume) << ',' << agent.visits(b, QAction::pause) << ','
               << agent.visits(b, QAction::resume) << '\n';
      });
      r.output(log_path);
    }
    std::cout << "iterations=" << rep.iterations << "\nresumes=" << rep.resumes << '\n';
    fmt(std::cout, "final_epsilon", rep.final_epsilon);
    fmt(std::cout, "q_resume", agent.q(steady, QAction::resume));
    fmt(std::cout, "q_pause", agent.q(steady, QAction::pause));
    std::cout << "greedy_always_resume=" << (greedy_always_resumes(agent, FixedDelayEnv{delay}, 1000) ? 1 : 0)
              << '\n';
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information simulation, measurement and analysis"};
  app.set_version_flag("--version", AOI_VERSION);
  app.require_subcommand(1);

  SimCmd sim;
  SweepCmd sweep;
  AnalyzeCmd analyze;
  EchoServerCmd echo;
  SamplerCmd sampler;
  SyncCmd sync;
  PolicyCmd policy;

  auto* sim_app = app.add_subcommand("sim", "Run one queue simulation and write its trace");
  sim.attach(sim_app);
  auto* sweep_app = app.add_subcommand("sweep", "Sweep the arrival rate and write one CSV row per point");
  sweep.attach(sweep_app);
  auto* analyze_app = app.add_subcommand("analyze", "Age statistics of a trace CSV");
  analyze.attach(analyze_app);
  auto* measure_app = app.add_subcommand("measure", "Live or emulated echo measurements");
  measure_app->require_subcommand(1);
  auto* echo_app = measure_app->add_subcommand("echo-server", "Serve UDP echo requests");
  echo.attach(echo_app);
  auto* sampler_app = measure_app->add_subcommand("sampler", "Send timestamped updates to an echo server");
  sampler.attach(sampler_app);
  auto* sync_app = measure_app->add_subcommand("sync", "Estimate the echo server's clock offset");
  sync.attach(sync_app);
  auto* policy_app = app.add_subcommand("policy", "Closed-loop rate policy over an emulated channel");
  policy.attach(policy_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  Run run;
  run.argv.assign(argv, argv + argc);
  try {
    int rc = kExitOk;
    auto go = [&](CLI::App* sub, auto& cmd, const char* label) {
      if (!sub->parsed()) return false;
      run.subcommand = label;
      run.config = options_json(*sub);
      rc = cmd.run(run);
      return true;
    };
    go(sim_app, sim, "sim") || go(sweep_app, sweep, "sweep") || go(analyze_app, analyze, "analyze") ||
        go(echo_app, echo, "measure echo-server") || go(sampler_app, sampler, "measure sampler") ||
        go(sync_app, sync, "measure sync") || go(policy_app, policy, "policy");
    run.write_manifest();
    return rc;
  } catch (const aoi::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aoi::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    run.write_manifest();
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
