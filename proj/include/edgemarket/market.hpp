#pragma once

// Market scenario, per-run instances and the episode engine that strings
// futures negotiation, transactions and renewal decisions together.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/futures.hpp"
#include "edgemarket/model.hpp"
#include "edgemarket/reputation.hpp"
#include "edgemarket/spot.hpp"
#include "edgemarket/stats.hpp"
#include "edgemarket/trace.hpp"

namespace edgemarket::market {

// occasional buyers are numbered from here so they never clash with trace ids
inline constexpr BuyerId kOccasionalIdBase = 1000000;

/// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

struct ProfileRanges {
  spot::Range compute_rate{1e9 / 600, 1.5e9 / 600};
  spot::Range tx_power{0.5, 0.55};
  spot::Range compute_power{0.45, 0.5};
  double gain_mu1 = 100.0;
  double gain_mu2 = 400.0;
};

struct MarketScenario {
  model::SellerProfile seller{1.5e12 / 600, 0.7, 600, 0.5, 2400.0};
  model::TaskConfig task{1.5e6, 6e6, 10.0, 10.0, 1.0};
  int fixed_buyers = 30;
  ProfileRanges fb_profiles;
  spot::OccasionalModel occasional;
  futures::NegotiationGrid grid;  // ladders only; quantity bounds come from histories
  spot::SpotGrid spot_grid;
  stats::RiskConfig risk;
  int history_days = 30;
  int transactions = 100;
  trace::GeneratorSpec trace;
  std::string trace_path;  // empty: synthetic trace per run
  double latency_min_ms = 1.0;
  double latency_max_ms = 15.0;
};

inline void validate(const MarketScenario& s) {
  model::validate(s.seller);
  model::validate(s.task);
  if (s.task.w1 == 0.0 && s.task.w2 == 0.0) throw std::invalid_argument("task.w1 and task.w2 cannot both be zero");
  if (s.fixed_buyers < 0) throw std::invalid_argument("buyers.count must be >= 0");
  if (!(s.fb_profiles.gain_mu1 > 0) || s.fb_profiles.gain_mu2 < s.fb_profiles.gain_mu1)
    throw std::invalid_argument("buyers.gain_mu1/gain_mu2 need 0 < mu1 <= mu2");
  for (const auto* r : {&s.fb_profiles.compute_rate, &s.fb_profiles.tx_power, &s.fb_profiles.compute_power,
                        &s.occasional.compute_rate, &s.occasional.tx_power, &s.occasional.compute_power,
                        &s.occasional.gain})
    if (!(r->lo > 0) || r->hi < r->lo) throw std::invalid_argument("profile ranges need 0 < min <= max");
  if (s.occasional.arrival_rate < 0) throw std::invalid_argument("ob.arrival_rate must be >= 0");
  if (s.occasional.demand_min < 0 || s.occasional.demand_max < s.occasional.demand_min)
    throw std::invalid_argument("ob demand range is invalid");
  futures::validate(s.grid);
  spot::validate(s.spot_grid);
  stats::validate(s.risk);
  trace::validate(s.trace);
  if (s.history_days < 1 || s.transactions < 1) throw std::invalid_argument("history_days and horizon must be >= 1");
  if (!(s.latency_min_ms >= 0) || s.latency_max_ms < s.latency_min_ms)
    throw std::invalid_argument("latency range is invalid");
}

struct MarketInstance {
  std::uint64_t seed = 0;
  std::vector<futures::FixedBuyer> buyers;       // profiles and initial histories
  std::vector<std::vector<int>> demand_rows;     // per transaction, per fixed buyer

  std::vector<model::BuyerProfile> profiles() const {
    std::vector<model::BuyerProfile> out;
    for (const auto& b : buyers) out.push_back(b.profile);
    return out;
  }
};

inline MarketInstance instance_from_trace(const MarketScenario& s, const trace::TraceData& data, std::uint64_t seed) {
  if (static_cast<int>(data.realizations.size()) < s.transactions)
    throw std::invalid_argument("trace has " + std::to_string(data.realizations.size()) +
                                " realization days, the horizon needs " + std::to_string(s.transactions));
  MarketInstance inst;
  inst.seed = seed;
  std::mt19937_64 rng(derive_seed(seed, 11));
  for (std::size_t i = 0; i < data.buyer_ids.size(); ++i) {
    if (data.buyer_ids[i] < 0 || data.buyer_ids[i] >= kOccasionalIdBase)
      throw std::invalid_argument("trace buyer ids must lie in [0, " + std::to_string(kOccasionalIdBase) + ")");
    futures::FixedBuyer b;
    b.id = data.buyer_ids[i];
    b.profile.compute_rate = s.fb_profiles.compute_rate.draw(rng);
    b.profile.tx_power = s.fb_profiles.tx_power.draw(rng);
    b.profile.compute_power = s.fb_profiles.compute_power.draw(rng);
    b.profile.channel = model::UniformGain{s.fb_profiles.gain_mu1, s.fb_profiles.gain_mu2};
    b.history = data.histories[i];
    inst.buyers.push_back(std::move(b));
  }
  inst.demand_rows.assign(data.realizations.begin(), data.realizations.begin() + s.transactions);
  return inst;
}

/// Instance with a synthetic trace (or the scenario's trace file) and buyer
/// profiles drawn from the scenario ranges.
inline MarketInstance make_instance(const MarketScenario& s, std::uint64_t seed) {
  if (!s.trace_path.empty()) return instance_from_trace(s, trace::load_trace(s.trace_path, s.history_days), seed);
  const auto rows = trace::generate_trace(std::max(1, s.fixed_buyers), s.history_days + s.transactions,
                                          derive_seed(seed, 12), s.trace);
  auto data = trace::split_rows(rows, s.history_days);
  if (s.fixed_buyers == 0) {
    data.buyer_ids.clear();
    data.histories.clear();
    for (auto& r : data.realizations) r.clear();
  }
  return instance_from_trace(s, data, seed);
}

/// Realization of transaction t, shared by every method run on the instance.
inline spot::Realization realization_for(const MarketScenario& s, const MarketInstance& inst, int t) {
  spot::Rng rng(derive_seed(inst.seed, 21, static_cast<std::uint64_t>(t + 1)));
  const auto profiles = inst.profiles();
  return spot::realize_demands(inst.demand_rows.at(static_cast<std::size_t>(t)), profiles, s.occasional, kOccasionalIdBase, rng);
}

inline spot::TransactionConfig transaction_config(const MarketScenario& s, spot::SpotMode mode) {
  return {s.seller, s.task, s.spot_grid, mode, s.latency_min_ms, s.latency_max_ms};
}

/// How decision runtime is measured: wall clock, or a deterministic count of
/// elementary operations times a nominal cost.
struct DecisionClock {
  enum class Mode { wall, ops } mode = Mode::wall;
  double ns_per_op = 1.0;
};

/// Futures negotiations memoized by the demand histories they were run on.
class NegotiationCache {
 public:
  const futures::FuturesResult& negotiate(const futures::FuturesMarket& m, const futures::NegotiationGrid& ladders,
                                          const stats::RiskConfig& risk) {
    std::vector<std::vector<int>> key;
    for (const auto& b : m.buyers) key.push_back(b.history.samples());
    auto it = results_.find(key);
    if (it != results_.end()) {
      ++hits_;
      return it->second;
    }
    ++misses_;
    auto res = futures::negotiate_futures(m, futures::grid_for(m, ladders), risk);
    return results_.emplace(std::move(key), std::move(res)).first->second;
  }
  long hits() const { return hits_; }
  long misses() const { return misses_; }

 private:
  std::map<std::vector<std::vector<int>>, futures::FuturesResult> results_;
  long hits_ = 0;
  long misses_ = 0;
};

/// A set of long-term contracts together with the histories they were negotiated on.
struct ContractEpoch {
  int first_transaction = 0;
  std::vector<stats::EmpiricalDemand> histories;
  futures::FuturesResult result;
};

struct SessionOptions {
  spot::SpotMode spot_mode = spot::SpotMode::residual;
  bool allow_renewal = true;
  int max_renewals = 100;
  reputation::RLConfig rl;
  DecisionClock clock;
};

struct StepResult {
  double reward = 0.0;
  bool transaction = false;
  bool renewed = false;
  bool terminal = false;
};

/// One episode over an instance: contracts are signed up front, then each
/// step either renews them (renegotiating on the extended history) or runs
/// the next transaction.
class MarketSession {
 public:
  MarketSession(const MarketScenario& s, const MarketInstance& inst, SessionOptions opts,
                std::shared_ptr<NegotiationCache> cache = nullptr)
      : scenario_(&s), instance_(&inst), opts_(std::move(opts)), cache_(cache ? cache : std::make_shared<NegotiationCache>()) {
    profiles_ = inst.profiles();
    market_.seller = s.seller;
    market_.task = s.task;
    market_.buyers = inst.buyers;
    const auto nf = inst.buyers.size();
    demand_scale_.resize(nf);
    int n_top = 1;
    for (std::size_t i = 0; i < nf; ++i) {
      const auto q = futures::bounds_from_history(inst.buyers[i].history);
      demand_scale_[i] = q.n_max;
      n_top = std::max(n_top, q.n_max);
    }
    utility_scale_ = std::max(1.0, static_cast<double>(nf) * s.grid.price.max * n_top);
    ni_scale_ = 2.0 * (static_cast<double>(nf) + 1.0) + 2.0 * s.occasional.arrival_rate + 1.0;
    rep_scale_ = std::max(1.0, opts_.rl.w_fulfilled * s.seller.capacity);
    negotiate();
    // first observation: the last history day replayed under the new contracts
    std::vector<int> last(nf);
    for (std::size_t i = 0; i < nf; ++i) last[i] = inst.buyers[i].history.samples().back();
    spot::Rng rng(derive_seed(inst.seed, 22));
    last_realization_ = spot::realize_demands(last, profiles_, s.occasional, kOccasionalIdBase, rng);
    state_ = replay();
  }

  const reputation::MarketState& state() const { return state_; }
  bool done() const { return executed_ >= scenario_->transactions; }
  int executed() const { return executed_; }
  int renewals() const { return renewals_; }
  /// A renewal needs at least one transaction since the last negotiation;
  /// otherwise the history, and so the contract, would be unchanged.
  bool can_renew() const {
    return opts_.allow_renewal && renewals_ < opts_.max_renewals && epochs_.back().first_transaction < executed_;
  }
  const std::vector<spot::TransactionOutcome>& outcomes() const { return outcomes_; }
  const std::vector<model::LongTermContract>& contracts() const { return contracts_; }
  const std::vector<ContractEpoch>& epochs() const { return epochs_; }
  const std::vector<model::BuyerProfile>& profiles() const { return profiles_; }
  NegotiationCache& cache() { return *cache_; }

  double total_utility(const spot::TransactionOutcome& o) const {
    return o.buyer_total_utility() + o.seller_total_utility();
  }
  double reputation_of(const spot::TransactionOutcome& o) const {
    return reputation::reputation_value(o.fulfilled_tasks, o.defaulted_tasks, opts_.rl.w_fulfilled, opts_.rl.w_defaulted);
  }

  /// `policy_ms`/`policy_ops` is the cost of the decision that chose `action`;
  /// it is charged to the next transaction's runtime.
  StepResult step(int action, double policy_ms = 0.0, long policy_ops = 0) {
    if (done()) throw std::logic_error("episode already finished");
    pending_ms_ += policy_ms;
    pending_ops_ += policy_ops;
    StepResult res;
    if (action == reputation::kRenew && can_renew()) {
      ++renewals_;
      negotiate();
      state_ = replay();
      res.renewed = true;
      res.reward = reputation::reward(reputation::kRenew, 0.0, 0.0, opts_.rl);
      return res;
    }
    const int t = executed_;
    const auto realization = realization_for(*scenario_, *instance_, t);
    spot::Rng rng(derive_seed(instance_->seed, 23, static_cast<std::uint64_t>(t + 1)));
    const auto cfg = transaction_config(*scenario_, opts_.spot_mode);
    auto outcome = spot::execute_transaction(contracts_, profiles_, realization, cfg, rng, pending_ni_);
    outcome.decision_ops += pending_ops_;
    if (opts_.clock.mode == DecisionClock::Mode::wall)
      outcome.decision_ms += pending_ms_;
    else
      outcome.decision_ms = static_cast<double>(outcome.decision_ops) * opts_.clock.ns_per_op * 1e-6;
    pending_ni_ = 0;
    pending_ms_ = 0.0;
    pending_ops_ = 0;
    for (std::size_t i = 0; i < market_.buyers.size(); ++i)
      market_.buyers[i].history.append(realization.fb_demands[i]);
    ++executed_;
    last_realization_ = realization;
    state_ = observe(outcome);
    res.transaction = true;
    res.reward = reputation::reward(reputation::kContinue, total_utility(outcome), reputation_of(outcome), opts_.rl);
    res.terminal = done();
    outcomes_.push_back(std::move(outcome));
    return res;
  }

 private:
  void negotiate() {
    const auto& result = cache_->negotiate(market_, scenario_->grid, scenario_->risk);
    contracts_ = result.contracts;
    pending_ni_ += result.interactions;
    epochs_.push_back({executed_, market_.histories(), result});
  }

  reputation::MarketState observe(const spot::TransactionOutcome& o) const {
    reputation::MarketState s;
    for (std::size_t i = 0; i < o.realized_demands.size(); ++i)
      s.demand_vector.push_back(static_cast<double>(o.realized_demands[i]) / demand_scale_[i]);
    s.total_utility = total_utility(o) / utility_scale_;
    s.interaction_count = o.interactions / ni_scale_;
    s.reputation = reputation_of(o) / rep_scale_;
    return s;
  }

  /// Observation of the last realization replayed under the current contracts.
  reputation::MarketState replay() const {
    spot::Rng rng(derive_seed(instance_->seed, 24, static_cast<std::uint64_t>(executed_ + 1)));
    const auto cfg = transaction_config(*scenario_, opts_.spot_mode);
    const auto o = spot::execute_transaction(contracts_, profiles_, last_realization_, cfg, rng, pending_ni_);
    return observe(o);
  }

  const MarketScenario* scenario_;
  const MarketInstance* instance_;
  SessionOptions opts_;
  std::shared_ptr<NegotiationCache> cache_;
  std::vector<model::BuyerProfile> profiles_;
  futures::FuturesMarket market_;
  std::vector<model::LongTermContract> contracts_;
  std::vector<ContractEpoch> epochs_;
  std::vector<spot::TransactionOutcome> outcomes_;
  spot::Realization last_realization_;
  reputation::MarketState state_;
  std::vector<double> demand_scale_;
  double utility_scale_ = 1.0;
  double ni_scale_ = 1.0;
  double rep_scale_ = 1.0;
  int executed_ = 0;
  int renewals_ = 0;
  int pending_ni_ = 0;
  double pending_ms_ = 0.0;
  long pending_ops_ = 0;
};

}  // namespace edgemarket::market
