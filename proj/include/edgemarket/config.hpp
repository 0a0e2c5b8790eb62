#pragma once

// Experiment configuration: flat `section.key = value` lines, `#` comments.
// Unknown keys and malformed values are errors naming the key and line.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/market.hpp"
#include "edgemarket/reputation.hpp"

namespace edgemarket::config {

struct MarketConfig {
  market::MarketScenario scenario;
  reputation::RLConfig rl;
  int runs = 1;
  std::uint64_t seed = 1;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(MarketConfig&, const std::string& key, const std::string& value)>;

template <class G>
Setter real_field(G get) {
  return [get](MarketConfig& c, const std::string& k, const std::string& v) { get(c) = to_double(k, v); };
}
template <class G>
Setter int_field(G get) {
  return [get](MarketConfig& c, const std::string& k, const std::string& v) {
    const auto x = to_int(k, v);
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(k + ": value out of range");
    get(c) = static_cast<int>(x);
  };
}

inline const std::map<std::string, Setter>& setters() {
  using C = MarketConfig;
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    // seller and task
    t["seller.compute_rate"] = real_field([](C& c) -> double& { return c.scenario.seller.compute_rate; });
    t["seller.compute_power"] = real_field([](C& c) -> double& { return c.scenario.seller.compute_power; });
    t["seller.capacity"] = int_field([](C& c) -> int& { return c.scenario.seller.capacity; });
    t["seller.hardware_unit_cost"] = real_field([](C& c) -> double& { return c.scenario.seller.hardware_unit_cost; });
    t["seller.desired_utility"] = real_field([](C& c) -> double& { return c.scenario.seller.desired_utility; });
    t["task.data_size_bits"] = real_field([](C& c) -> double& { return c.scenario.task.data_size_bits; });
    t["task.bandwidth_hz"] = real_field([](C& c) -> double& { return c.scenario.task.bandwidth_hz; });
    t["task.w1"] = real_field([](C& c) -> double& { return c.scenario.task.w1; });
    t["task.w2"] = real_field([](C& c) -> double& { return c.scenario.task.w2; });
    t["task.w3"] = real_field([](C& c) -> double& { return c.scenario.task.w3; });
    // fixed buyers
    t["buyers.count"] = int_field([](C& c) -> int& { return c.scenario.fixed_buyers; });
    t["buyers.compute_rate_min"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.compute_rate.lo; });
    t["buyers.compute_rate_max"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.compute_rate.hi; });
    t["buyers.tx_power_min"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.tx_power.lo; });
    t["buyers.tx_power_max"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.tx_power.hi; });
    t["buyers.compute_power_min"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.compute_power.lo; });
    t["buyers.compute_power_max"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.compute_power.hi; });
    t["buyers.gain_mu1"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.gain_mu1; });
    t["buyers.gain_mu2"] = real_field([](C& c) -> double& { return c.scenario.fb_profiles.gain_mu2; });
    // occasional buyers
    t["ob.arrival_rate"] = real_field([](C& c) -> double& { return c.scenario.occasional.arrival_rate; });
    t["ob.demand_min"] = int_field([](C& c) -> int& { return c.scenario.occasional.demand_min; });
    t["ob.demand_max"] = int_field([](C& c) -> int& { return c.scenario.occasional.demand_max; });
    t["ob.compute_rate_min"] = real_field([](C& c) -> double& { return c.scenario.occasional.compute_rate.lo; });
    t["ob.compute_rate_max"] = real_field([](C& c) -> double& { return c.scenario.occasional.compute_rate.hi; });
    t["ob.tx_power_min"] = real_field([](C& c) -> double& { return c.scenario.occasional.tx_power.lo; });
    t["ob.tx_power_max"] = real_field([](C& c) -> double& { return c.scenario.occasional.tx_power.hi; });
    t["ob.compute_power_min"] = real_field([](C& c) -> double& { return c.scenario.occasional.compute_power.lo; });
    t["ob.compute_power_max"] = real_field([](C& c) -> double& { return c.scenario.occasional.compute_power.hi; });
    t["ob.gain_min"] = real_field([](C& c) -> double& { return c.scenario.occasional.gain.lo; });
    t["ob.gain_max"] = real_field([](C& c) -> double& { return c.scenario.occasional.gain.hi; });
    // futures grid
    t["grid.price_max"] = real_field([](C& c) -> double& { return c.scenario.grid.price.max; });
    t["grid.price_min"] = real_field([](C& c) -> double& { return c.scenario.grid.price.min; });
    t["grid.price_step"] = real_field([](C& c) -> double& { return c.scenario.grid.price.step; });
    t["grid.buyer_penalty_max"] = real_field([](C& c) -> double& { return c.scenario.grid.buyer_penalty.max; });
    t["grid.buyer_penalty_min"] = real_field([](C& c) -> double& { return c.scenario.grid.buyer_penalty.min; });
    t["grid.buyer_penalty_step"] = real_field([](C& c) -> double& { return c.scenario.grid.buyer_penalty.step; });
    t["grid.seller_penalty_max"] = real_field([](C& c) -> double& { return c.scenario.grid.seller_penalty.max; });
    t["grid.seller_penalty_min"] = real_field([](C& c) -> double& { return c.scenario.grid.seller_penalty.min; });
    t["grid.seller_penalty_step"] = real_field([](C& c) -> double& { return c.scenario.grid.seller_penalty.step; });
    // spot grid
    t["spot.price_max"] = real_field([](C& c) -> double& { return c.scenario.spot_grid.price.max; });
    t["spot.price_min"] = real_field([](C& c) -> double& { return c.scenario.spot_grid.price.min; });
    t["spot.price_step"] = real_field([](C& c) -> double& { return c.scenario.spot_grid.price.step; });
    t["spot.n_min"] = int_field([](C& c) -> int& { return c.scenario.spot_grid.n_min; });
    t["spot.n_max"] = int_field([](C& c) -> int& { return c.scenario.spot_grid.n_max; });
    // risk
    t["risk.rho1"] = real_field([](C& c) -> double& { return c.scenario.risk.rho1; });
    t["risk.rho2"] = real_field([](C& c) -> double& { return c.scenario.risk.rho2; });
    t["risk.rho3"] = real_field([](C& c) -> double& { return c.scenario.risk.rho3; });
    t["risk.u_min"] = real_field([](C& c) -> double& { return c.scenario.risk.u_min; });
    t["risk.overbook_rate"] = real_field([](C& c) -> double& { return c.scenario.risk.overbook_rate; });
    // market timeline
    t["market.history_days"] = int_field([](C& c) -> int& { return c.scenario.history_days; });
    t["market.transactions"] = int_field([](C& c) -> int& { return c.scenario.transactions; });
    t["market.latency_min_ms"] = real_field([](C& c) -> double& { return c.scenario.latency_min_ms; });
    t["market.latency_max_ms"] = real_field([](C& c) -> double& { return c.scenario.latency_max_ms; });
    // demand trace
    t["trace.path"] = [](C& c, const std::string&, const std::string& v) { c.scenario.trace_path = v; };
    t["trace.mean_min"] = real_field([](C& c) -> double& { return c.scenario.trace.mean_min; });
    t["trace.mean_max"] = real_field([](C& c) -> double& { return c.scenario.trace.mean_max; });
    t["trace.season_amplitude"] = real_field([](C& c) -> double& { return c.scenario.trace.season_amplitude; });
    t["trace.season_period"] = int_field([](C& c) -> int& { return c.scenario.trace.season_period; });
    t["trace.shift_day"] = int_field([](C& c) -> int& { return c.scenario.trace.shift_day; });
    t["trace.shift_factor_min"] = real_field([](C& c) -> double& { return c.scenario.trace.shift_factor_min; });
    t["trace.shift_factor_max"] = real_field([](C& c) -> double& { return c.scenario.trace.shift_factor_max; });
    // renewal agent
    t["rl.discount"] = real_field([](C& c) -> double& { return c.rl.discount; });
    t["rl.soft_update"] = real_field([](C& c) -> double& { return c.rl.soft_update; });
    t["rl.epsilon_start"] = real_field([](C& c) -> double& { return c.rl.epsilon.start; });
    t["rl.epsilon_end"] = real_field([](C& c) -> double& { return c.rl.epsilon.end; });
    t["rl.epsilon_decay_steps"] = [](C& c, const std::string& k, const std::string& v) {
      c.rl.epsilon.decay_steps = static_cast<long>(to_int(k, v));
    };
    t["rl.renew_penalty"] = real_field([](C& c) -> double& { return c.rl.renew_penalty; });
    t["rl.w_fulfilled"] = real_field([](C& c) -> double& { return c.rl.w_fulfilled; });
    t["rl.w_defaulted"] = real_field([](C& c) -> double& { return c.rl.w_defaulted; });
    t["rl.w_utility"] = real_field([](C& c) -> double& { return c.rl.w_utility; });
    t["rl.w_reputation"] = real_field([](C& c) -> double& { return c.rl.w_reputation; });
    t["rl.replay_capacity"] = [](C& c, const std::string& k, const std::string& v) {
      const auto x = to_int(k, v);
      if (x < 1) throw ConfigError(k + ": must be >= 1");
      c.rl.replay_capacity = static_cast<std::size_t>(x);
    };
    t["rl.minibatch"] = [](C& c, const std::string& k, const std::string& v) {
      const auto x = to_int(k, v);
      if (x < 1) throw ConfigError(k + ": must be >= 1");
      c.rl.minibatch = static_cast<std::size_t>(x);
    };
    t["rl.learning_rate"] = real_field([](C& c) -> double& { return c.rl.learning_rate; });
    t["rl.horizon"] = int_field([](C& c) -> int& { return c.rl.horizon; });
    t["rl.hidden"] = [](C& c, const std::string& k, const std::string& v) {
      std::vector<int> widths;
      std::stringstream ss(v);
      std::string cell;
      while (std::getline(ss, cell, ',')) widths.push_back(static_cast<int>(to_int(k, trim(cell))));
      if (widths.empty()) throw ConfigError(k + ": expected a comma-separated list of widths");
      c.rl.hidden = widths;
    };
    t["rl.reward_scale"] = real_field([](C& c) -> double& { return c.rl.reward_scale; });
    t["rl.adam"] = [](C& c, const std::string& k, const std::string& v) { c.rl.adam = to_bool(k, v); };
    t["rl.max_renewals"] = int_field([](C& c) -> int& { return c.rl.max_renewals; });
    t["rl.discount_renewals"] = [](C& c, const std::string& k, const std::string& v) {
      c.rl.discount_renewals = to_bool(k, v);
    };
    t["rl.episodes"] = int_field([](C& c) -> int& { return c.rl.episodes; });
    // experiment
    t["run.runs"] = int_field([](C& c) -> int& { return c.runs; });
    t["run.seed"] = [](C& c, const std::string& k, const std::string& v) {
      const auto x = to_int(k, v);
      if (x < 0) throw ConfigError(k + ": must be >= 0");
      c.seed = static_cast<std::uint64_t>(x);
    };
    return t;
  }();
  return table;
}

}  // namespace detail

/// Rethrows validation failures of the assembled config as ConfigError.
inline void validate(const MarketConfig& c) {
  try {
    market::validate(c.scenario);
    reputation::validate(c.rl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  if (c.runs < 1) throw ConfigError("run.runs: must be >= 1");
}

/// `base_dir` resolves a relative trace.path.
inline MarketConfig parse(std::istream& in, const std::string& name, const std::string& base_dir = "") {
  MarketConfig c;
  std::string line;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = name + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = detail::setters().find(key);
    if (it == detail::setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError(where + key + ": already set on line " + std::to_string(seen[key]));
    seen[key] = line_no;
    try {
      it->second(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!c.scenario.trace_path.empty() && !base_dir.empty() && std::filesystem::path(c.scenario.trace_path).is_relative())
    c.scenario.trace_path = (std::filesystem::path(base_dir) / c.scenario.trace_path).string();
  validate(c);
  return c;
}

inline MarketConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse(in, path, std::filesystem::path(path).parent_path().string());
}

inline std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

}  // namespace edgemarket::config
