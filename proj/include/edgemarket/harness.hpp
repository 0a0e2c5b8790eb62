#pragma once

// Methods under comparison, metric computation and Monte-Carlo evaluation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/market.hpp"
#include "edgemarket/training.hpp"

namespace edgemarket::harness {

enum class Method { oh_trust, conspot, confutures, hybridfs, random };

inline const std::vector<Method>& all_methods() {
  static const std::vector<Method> m{Method::oh_trust, Method::conspot, Method::confutures, Method::hybridfs,
                                     Method::random};
  return m;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::oh_trust: return "oh-trust";
    case Method::conspot: return "conspot";
    case Method::confutures: return "confutures";
    case Method::hybridfs: return "hybridfs";
    case Method::random: return "random";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (auto m : all_methods())
    if (method_name(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s + "' (expected oh-trust, conspot, confutures, hybridfs or random)");
}

struct MethodRun {
  std::vector<spot::TransactionOutcome> outcomes;
  std::vector<market::ContractEpoch> epochs;  // futures-based methods only
  int renewals = 0;
};

struct RunOptions {
  market::DecisionClock clock;
  // renewal policy for oh-trust; never-renew when empty
  std::shared_ptr<const reputation::LearnerState> learner;
};

namespace detail {

template <class F>
MethodRun run_stateless(const market::MarketScenario& s, const market::MarketInstance& inst,
                        const market::DecisionClock& clock, F&& execute) {
  MethodRun out;
  const auto profiles = inst.profiles();
  const auto cfg = market::transaction_config(s, spot::SpotMode::residual);
  for (int t = 0; t < s.transactions; ++t) {
    const auto r = market::realization_for(s, inst, t);
    spot::Rng rng(market::derive_seed(inst.seed, 23, static_cast<std::uint64_t>(t + 1)));
    auto o = execute(profiles, r, cfg, rng);
    if (clock.mode == market::DecisionClock::Mode::ops)
      o.decision_ms = static_cast<double>(o.decision_ops) * clock.ns_per_op * 1e-6;
    out.outcomes.push_back(std::move(o));
  }
  return out;
}

}  // namespace detail

inline MethodRun run_method(Method m, const market::MarketScenario& s, const market::MarketInstance& inst,
                            const reputation::RLConfig& rl, const RunOptions& opts = {},
                            std::shared_ptr<market::NegotiationCache> cache = nullptr) {
  if (m == Method::conspot)
    return detail::run_stateless(s, inst, opts.clock, [](const auto& p, const auto& r, const auto& c, auto& rng) {
      return spot::execute_spot_only(p, r, c, rng);
    });
  if (m == Method::random)
    return detail::run_stateless(s, inst, opts.clock, [](const auto& p, const auto& r, const auto& c, auto& rng) {
      return spot::execute_random(p, r, c, rng);
    });
  market::SessionOptions so;
  so.spot_mode = m == Method::confutures ? spot::SpotMode::none : spot::SpotMode::residual;
  so.allow_renewal = m == Method::oh_trust;
  so.max_renewals = rl.max_renewals;
  so.rl = rl;
  so.clock = opts.clock;
  market::MarketSession session(s, inst, so, std::move(cache));
  const auto policy = m == Method::oh_trust && opts.learner ? training::greedy(opts.learner) : training::never_renew();
  training::run_policy(session, policy);
  return {session.outcomes(), session.epochs(), session.renewals()};
}

struct MetricsRow {
  std::string method;
  int run = 0;  // -1 for the aggregate row
  double buyer_utility = 0.0;
  double seller_utility = 0.0;
  double potsu = 0.0;
  double vorm = 0.0;
  double trlc = 0.0;
  double uor = 0.0;
  double ni = 0.0;
  double ptct_ms = 0.0;
  double rt_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "method,run,buyer_utility,seller_utility,potsu,vorm,trlc,uor,ni,ptct_ms,rt_ms";

inline MetricsRow compute_metrics(const std::vector<spot::TransactionOutcome>& outcomes,
                                  const model::SellerProfile& seller, const reputation::RLConfig& rl) {
  if (outcomes.empty()) throw std::invalid_argument("metrics need at least one transaction");
  MetricsRow r;
  long fulfilled = 0, defaulted = 0, tasks = 0;
  double latency = 0.0;
  for (const auto& o : outcomes) {
    const double su = o.seller_total_utility();
    r.buyer_utility += o.buyer_total_utility();
    r.seller_utility += su;
    r.potsu += su >= seller.desired_utility ? 1.0 : 0.0;
    r.vorm += reputation::reputation_value(o.fulfilled_tasks, o.defaulted_tasks, rl.w_fulfilled, rl.w_defaulted);
    fulfilled += o.fulfilled_tasks;
    defaulted += o.defaulted_tasks;
    r.uor += seller.capacity > 0 ? static_cast<double>(o.served_tasks) / seller.capacity : 0.0;
    r.ni += o.interactions;
    for (double x : o.task_latencies_ms) latency += x;
    tasks += static_cast<long>(o.task_latencies_ms.size());
    r.rt_ms += o.decision_ms;
  }
  const double n = static_cast<double>(outcomes.size());
  r.buyer_utility /= n;
  r.seller_utility /= n;
  r.potsu /= n;
  r.vorm /= n;
  r.uor /= n;
  r.ni /= n;
  r.rt_ms /= n;
  // no contract-bound tasks at all counts as zero completion
  r.trlc = fulfilled + defaulted > 0 ? static_cast<double>(fulfilled) / static_cast<double>(fulfilled + defaulted) : 0.0;
  r.ptct_ms = tasks > 0 ? latency / static_cast<double>(tasks) : 0.0;
  return r;
}

inline MetricsRow mean_row(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("cannot average zero rows");
  MetricsRow m;
  m.method = rows.front().method;
  m.run = -1;
  for (const auto& r : rows) {
    m.buyer_utility += r.buyer_utility;
    m.seller_utility += r.seller_utility;
    m.potsu += r.potsu;
    m.vorm += r.vorm;
    m.trlc += r.trlc;
    m.uor += r.uor;
    m.ni += r.ni;
    m.ptct_ms += r.ptct_ms;
    m.rt_ms += r.rt_ms;
  }
  const double n = static_cast<double>(rows.size());
  m.buyer_utility /= n;
  m.seller_utility /= n;
  m.potsu /= n;
  m.vorm /= n;
  m.trlc /= n;
  m.uor /= n;
  m.ni /= n;
  m.ptct_ms /= n;
  m.rt_ms /= n;
  return m;
}

inline void write_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

inline void write_row(std::ostream& out, const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.method.c_str(),
                r.run < 0 ? "mean" : std::to_string(r.run).c_str(), r.buyer_utility, r.seller_utility, r.potsu,
                r.vorm, r.trlc, r.uor, r.ni, r.ptct_ms, r.rt_ms);
  out << buf << '\n';
}

struct MonteCarloConfig {
  int runs = 1;
  std::uint64_t seed = 1;
  RunOptions options;
};

struct MonteCarloReport {
  std::vector<MetricsRow> rows;       // per method, per run
  std::vector<MetricsRow> aggregate;  // one per method
  std::vector<int> renewals;          // per row
};

inline std::uint64_t run_seed(std::uint64_t seed, int run) {
  return market::derive_seed(seed, 51, static_cast<std::uint64_t>(run));
}

/// Every method sees the same instance in a given run.
inline MonteCarloReport run_monte_carlo(const market::MarketScenario& s, const reputation::RLConfig& rl,
                                        const std::vector<Method>& methods, const MonteCarloConfig& mc) {
  if (mc.runs < 1) throw std::invalid_argument("run.runs must be >= 1");
  market::validate(s);
  MonteCarloReport rep;
  std::vector<std::vector<MetricsRow>> per_method(methods.size());
  std::vector<std::vector<int>> per_method_renewals(methods.size());
  for (int run = 0; run < mc.runs; ++run) {
    const auto inst = market::make_instance(s, run_seed(mc.seed, run));
    auto cache = std::make_shared<market::NegotiationCache>();
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const auto res = run_method(methods[k], s, inst, rl, mc.options, cache);
      auto row = compute_metrics(res.outcomes, s.seller, rl);
      row.method = method_name(methods[k]);
      row.run = run;
      per_method[k].push_back(row);
      per_method_renewals[k].push_back(res.renewals);
    }
  }
  for (std::size_t k = 0; k < methods.size(); ++k) {
    rep.rows.insert(rep.rows.end(), per_method[k].begin(), per_method[k].end());
    rep.renewals.insert(rep.renewals.end(), per_method_renewals[k].begin(), per_method_renewals[k].end());
    rep.aggregate.push_back(mean_row(per_method[k]));
  }
  return rep;
}

inline void write_report(std::ostream& out, const MonteCarloReport& rep) {
  write_header(out);
  for (const auto& r : rep.rows) write_row(out, r);
  for (const auto& r : rep.aggregate) write_row(out, r);
}

/// Mean and half-width of a normal 95% interval of one metric over rows.
struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
  double lo() const { return mean - half_width; }
  double hi() const { return mean + half_width; }
};

template <class F>
Interval interval(const std::vector<MetricsRow>& rows, const std::string& method, F&& metric) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method) v.push_back(metric(r));
  if (v.empty()) throw std::invalid_argument("no rows for method " + method);
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, 1.96 * sd / std::sqrt(n)};
}

}  // namespace edgemarket::harness
