#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "aoi/error.hpp"
#include "aoi/sim/rng.hpp"

namespace aoi::policy {

enum class QAction : std::size_t { pause = 0, resume = 1 };
inline constexpr std::size_t kQActions = 2;

inline std::string_view to_string(QAction a) { return a == QAction::pause ? "pause" : "resume"; }

/// Per-step cost of sitting at age `age_s`.
inline double age_cost(double age_s) { return -std::expm1(-age_s); }

struct QConfig {
  double gamma = 0.99;
  double lr = 0.1;
  double epsilon0 = 1.0;
  double epsilon_decay = 0.995;
  std::size_t bins = 64;
  double min_age_s = 1e-3;
  double max_age_s = 100.0;
  double initial_q = 1.0;

  void check() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(lr > 0.0 && lr <= 1.0)) throw ConfigError("learning rate must lie in (0, 1]");
    if (!(epsilon0 >= 0.0 && epsilon0 <= 1.0)) throw ConfigError("epsilon0 must lie in [0, 1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
      throw ConfigError("epsilon decay must lie in (0, 1]");
    if (bins < 2) throw ConfigError("need at least two age bins");
    if (!(min_age_s > 0.0 && max_age_s > min_age_s)) throw ConfigError("bad age range");
    if (!std::isfinite(initial_q)) throw ConfigError("initial Q must be finite");
  }
};

/// Tabular pause/resume agent over geometric age bins. Q values are costs, so
/// the greedy action is the argmin. The step size for a (bin, action) cell is
/// max(lr, 1/visits): the first visit lands on the target, later ones average
/// with weight lr.
class QAgent {
 public:
  explicit QAgent(QConfig cfg = {}) : cfg_{cfg}, epsilon_{cfg.epsilon0} {
    cfg_.check();
    edges_.resize(cfg_.bins + 1);
    const double ratio = std::log(cfg_.max_age_s / cfg_.min_age_s);
    for (std::size_t i = 0; i <= cfg_.bins; ++i)
      edges_[i] = cfg_.min_age_s * std::exp(ratio * static_cast<double>(i) / static_cast<double>(cfg_.bins));
    q_.assign(cfg_.bins, {cfg_.initial_q, cfg_.initial_q});
    visits_.assign(cfg_.bins, {0, 0});
  }

  const QConfig& config() const { return cfg_; }
  const std::vector<double>& edges() const { return edges_; }
  std::size_t bin_count() const { return cfg_.bins; }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double e) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    epsilon_ = e;
  }

  /// Ages outside [min, max) clamp to the first or last bin.
  std::size_t bin(double age_s) const {
    if (!(age_s >= edges_.front())) return 0;
    auto it = std::upper_bound(edges_.begin(), edges_.end(), age_s);
    const auto idx = static_cast<std::size_t>(it - edges_.begin()) - 1;
    return std::min(idx, cfg_.bins - 1);
  }

  double q(std::size_t b, QAction a) const { return q_.at(b)[static_cast<std::size_t>(a)]; }
  std::uint64_t visits(std::size_t b, QAction a) const { return visits_.at(b)[static_cast<std::size_t>(a)]; }
  bool visited(std::size_t b) const { return visits_.at(b)[0] + visits_.at(b)[1] > 0; }
  // Both actions tried, so the greedy choice compares two estimates.
  bool informed(std::size_t b) const { return visits_.at(b)[0] > 0 && visits_.at(b)[1] > 0; }

  /// Ties go to resume.
  QAction greedy(double age_s) const {
    const auto& row = q_[bin(age_s)];
    return row[0] < row[1] ? QAction::pause : QAction::resume;
  }

  QAction act(double age_s, sim::Rng& rng) const {
    if (epsilon_ > 0.0 && rng.bernoulli(epsilon_))
      return rng.below(kQActions) == 0 ? QAction::pause : QAction::resume;
    return greedy(age_s);
  }

  /// One temporal-difference update; returns the target used.
  double step(double s, QAction a, double s_next, bool done) {
    const std::size_t b = bin(s);
    const auto ai = static_cast<std::size_t>(a);
    double target = age_cost(s_next);
    if (!done) {
      const auto& next = q_[bin(s_next)];
      target += cfg_.gamma * std::min(next[0], next[1]);
    }
    const std::uint64_t n = ++visits_[b][ai];
    const double rate = std::max(cfg_.lr, 1.0 / static_cast<double>(n));
    q_[b][ai] += rate * (target - q_[b][ai]);
    return target;
  }

  void end_episode() { epsilon_ *= cfg_.epsilon_decay; }

 private:
  QConfig cfg_;
  double epsilon_;
  std::vector<double> edges_;
  std::vector<std::array<double, kQActions>> q_;
  std::vector<std::array<std::uint64_t, kQActions>> visits_;
};

/// Unlimited-bandwidth source/monitor pair with a fixed one-way delay. Each
/// decision spans one delay period: resume delivers a fresh update (age falls
/// to the delay), pause lets the age grow by one period. Every decision ends an
/// episode, so the learned values are the terminal costs.
class FixedDelayEnv {
 public:
  explicit FixedDelayEnv(double delay_s = 1.0) : delay_s_{delay_s}, age_s_{delay_s} {
    if (!(delay_s > 0.0)) throw ConfigError("delay must be positive");
  }

  double age() const { return age_s_; }
  double delay() const { return delay_s_; }

  double step(QAction a) {
    age_s_ = a == QAction::resume ? delay_s_ : age_s_ + delay_s_;
    return age_s_;
  }

 private:
  double delay_s_;
  double age_s_;
};

struct QTrainReport {
  std::uint64_t iterations = 0;
  std::uint64_t resumes = 0;
  double final_epsilon = 0.0;
};

template <class Env>
QTrainReport train(QAgent& agent, Env& env, std::uint64_t iterations, sim::Rng& rng) {
  QTrainReport rep;
  for (std::uint64_t i = 0; i < iterations; ++i) {
    const double s = env.age();
    const QAction a = agent.act(s, rng);
    const double s_next = env.step(a);
    agent.step(s, a, s_next, true);
    agent.end_episode();
    if (a == QAction::resume) ++rep.resumes;
  }
  rep.iterations = iterations;
  rep.final_epsilon = agent.epsilon();
  return rep;
}

/// Follows the greedy policy from the environment's current state and reports
/// whether every action taken was resume.
template <class Env>
bool greedy_always_resumes(const QAgent& agent, Env env, std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) {
    const QAction a = agent.greedy(env.age());
    if (a != QAction::resume) return false;
    env.step(a);
  }
  return true;
}

}  // namespace aoi::policy
