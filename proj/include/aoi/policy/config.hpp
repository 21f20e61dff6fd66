#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "aoi/policy/acp.hpp"
#include "aoi/policy/qlearning.hpp"

namespace aoi::policy {

struct PolicyConfig {
  AcpConfig acp;
  double ewma_alpha = 0.125;
  QConfig q;

  void check() const {
    acp.check();
    q.check();
    if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) throw ConfigError("ewma_alpha must lie in (0, 1]");
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(std::string_view v, std::string_view key, std::size_t line) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("line " + std::to_string(line) + ": bad value for " + std::string(key));
  return out;
}

}  // namespace detail

/// `key=value` per line; blank lines and `#` comments are skipped. Keys not
/// mentioned keep their defaults.
inline PolicyConfig parse_policy_config(std::istream& in, PolicyConfig cfg = {}) {
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key=value");
    const auto key = detail::trim(s.substr(0, eq));
    const double v = detail::parse_real(detail::trim(s.substr(eq + 1)), key, line);
    if (key == "kappa") cfg.acp.kappa = v;
    else if (key == "epoch_ms") cfg.acp.min_epoch = from_seconds(v / 1e3);
    else if (key == "ewma_alpha") cfg.ewma_alpha = v;
    else if (key == "backlog_cap") cfg.acp.backlog_cap = v;
    else if (key == "gamma") cfg.q.gamma = v;
    else if (key == "lr") cfg.q.lr = v;
    else if (key == "epsilon0") cfg.q.epsilon0 = v;
    else if (key == "epsilon_decay") cfg.q.epsilon_decay = v;
    else if (key == "bins") {
      if (v < 2 || v != std::floor(v)) throw ConfigError("line " + std::to_string(line) + ": bins must be an integer >= 2");
      cfg.q.bins = static_cast<std::size_t>(v);
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key " + std::string(key));
    }
  }
  cfg.check();
  return cfg;
}

inline PolicyConfig load_policy_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy config " + path);
  return parse_policy_config(in);
}

inline constexpr std::string_view kDecisionLogHeader = "epoch,action,target_backlog,rate_hz,avg_age_s,backlog";

struct DecisionRecord {
  std::uint64_t epoch = 0;
  std::string action;
  double target_backlog = 0.0;
  double rate_hz = 0.0;
  double avg_age_s = 0.0;
  double backlog = 0.0;
};

inline void write_decision_log(std::ostream& os, const std::vector<DecisionRecord>& rows) {
  os << kDecisionLogHeader << '\n';
  os.precision(9);
  for (const auto& r : rows)
    os << r.epoch << ',' << r.action << ',' << r.target_backlog << ',' << r.rate_hz << ','
       << r.avg_age_s << ',' << r.backlog << '\n';
}

}  // namespace aoi::policy
