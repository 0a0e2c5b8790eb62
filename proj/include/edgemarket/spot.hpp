#pragma once

// One practical transaction: realized demand, fulfilment of long-term
// contracts, volunteer selection under shortage and temporary trading over
// whatever supply is left.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/futures.hpp"
#include "edgemarket/model.hpp"

namespace edgemarket::spot {

using Rng = std::mt19937_64;

struct SpotBuyer {
  BuyerId id = 0;
  bool fixed = false;  // fixed buyer trading its over-contract remainder
  int demand = 0;
  double valuation = 0.0;
};

struct SpotGrid {
  futures::PriceLadder price{10.0, 1.0, 1.0};
  int n_min = 1;
  int n_max = 50;
  int quantity_levels() const { return n_max - n_min + 1; }
};

inline void validate(const SpotGrid& g) {
  futures::validate(g.price, "spot.price");
  if (g.n_min < 1 || g.n_max < g.n_min) throw std::invalid_argument("spot quantity bounds need 1 <= n_min <= n_max");
}

struct SpotResult {
  std::vector<model::TemporaryContract> contracts;
  double price = 0.0;
  double seller_utility = 0.0;
  double buyer_utility = 0.0;
  long visits = 0;
  long visit_bound = 0;
  long ops = 0;
};

namespace detail {

struct Allocation {
  long total = 0;
  double buyer_utility = 0.0;
  std::vector<int> quantities;  // per eligible buyer
};

/// Best allocation at one price: largest total, then largest buyer utility.
/// `lo`/`hi` are each eligible buyer's quantity range; 0 is always allowed.
inline Allocation allocate(std::span<const int> lo, std::span<const int> hi, std::span<const double> margin,
                           int residual, long& ops) {
  const std::size_t k = lo.size();
  Allocation out;
  out.quantities.assign(k, 0);
  bool unit_steps = true;
  for (std::size_t j = 0; j < k; ++j) unit_steps = unit_steps && lo[j] <= 1;
  if (unit_steps) {
    // any total up to the capacity is reachable; fill the best margins first
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return margin[a] > margin[b]; });
    ops += static_cast<long>(k);
    int left = residual;
    for (std::size_t j : order) {
      const int take = std::min(left, hi[j]);
      if (take <= 0) break;
      out.quantities[j] = take;
      out.total += take;
      out.buyer_utility += take * margin[j];
      left -= take;
    }
    return out;
  }
  // best[j][c] = best buyer utility from the first j buyers using exactly c units
  constexpr double kNone = -1e300;
  const auto cap = static_cast<std::size_t>(residual);
  std::vector<std::vector<double>> best(k + 1, std::vector<double>(cap + 1, kNone));
  best[0][0] = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    best[j + 1] = best[j];
    for (std::size_t c = 0; c <= cap; ++c) {
      if (best[j][c] == kNone) continue;
      for (int q = lo[j]; q <= hi[j] && c + static_cast<std::size_t>(q) <= cap; ++q) {
        ++ops;
        auto& slot = best[j + 1][c + static_cast<std::size_t>(q)];
        slot = std::max(slot, best[j][c] + q * margin[j]);
      }
    }
  }
  std::size_t c = cap;
  while (best[k][c] == kNone) --c;
  out.total = static_cast<long>(c);
  out.buyer_utility = best[k][c];
  for (std::size_t j = k; j-- > 0;) {
    if (best[j][c] == best[j + 1][c]) continue;  // this buyer gets nothing
    for (int q = lo[j]; q <= hi[j] && static_cast<std::size_t>(q) <= c; ++q) {
      const double prev = best[j][c - static_cast<std::size_t>(q)];
      if (prev != kNone && prev + q * margin[j] == best[j + 1][c]) {
        out.quantities[j] = q;
        c -= static_cast<std::size_t>(q);
        break;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Temporary-contract negotiation over residual supply at one shared price.
inline SpotResult bin_tcd(std::span<const SpotBuyer> buyers, int residual, const SpotGrid& grid, double unit_cost) {
  validate(grid);
  if (residual < 0) throw std::invalid_argument("residual supply must be >= 0");
  SpotResult out;
  out.visit_bound = static_cast<long>(grid.price.levels()) * grid.quantity_levels() * static_cast<long>(buyers.size());
  if (buyers.empty() || residual == 0) return out;

  bool found = false;
  double best_seller = 0.0, best_buyer = 0.0;
  int best_level = -1;
  std::vector<std::size_t> best_index;
  std::vector<int> best_q;
  std::vector<std::size_t> index;
  std::vector<int> lo, hi;
  std::vector<double> margin;
  index.reserve(buyers.size());
  lo.reserve(buyers.size());
  hi.reserve(buyers.size());
  margin.reserve(buyers.size());
  for (int level = 0; level < grid.price.levels(); ++level) {
    const double p = grid.price.at(level);
    if (p < unit_cost) continue;
    index.clear();
    lo.clear();
    hi.clear();
    margin.clear();
    for (std::size_t k = 0; k < buyers.size(); ++k) {
      const int top = std::min(buyers[k].demand, grid.n_max);
      int low = -1, high = -1;
      for (int n = top; n >= grid.n_min; --n) {
        ++out.visits;
        if (p > buyers[k].valuation) continue;
        if (high < 0) high = n;
        low = n;
      }
      if (high < 0) continue;
      index.push_back(k);
      lo.push_back(low);
      hi.push_back(high);
      margin.push_back(buyers[k].valuation - p);
    }
    out.ops += static_cast<long>(buyers.size());
    if (index.empty()) continue;
    const auto alloc = detail::allocate(lo, hi, margin, residual, out.ops);
    if (alloc.total == 0) continue;
    const double seller = alloc.total * (p - unit_cost);
    const double tol = 1e-9 * std::max({1.0, std::fabs(seller), std::fabs(best_seller)});
    // ties: more buyer utility, then the lower price (later level)
    const bool take = !found || seller > best_seller + tol ||
                      (seller >= best_seller - tol && alloc.buyer_utility >= best_buyer - tol);
    if (take) {
      found = true;
      best_seller = seller;
      best_buyer = alloc.buyer_utility;
      best_level = level;
      best_index = index;
      best_q = alloc.quantities;
    }
  }
  out.ops += out.visits;
  if (!found) return out;
  out.price = grid.price.at(best_level);
  for (std::size_t j = 0; j < best_index.size(); ++j) {
    if (best_q[j] == 0) continue;
    const auto& b = buyers[best_index[j]];
    out.contracts.push_back({b.id, best_q[j], out.price});
    out.seller_utility += best_q[j] * (out.price - unit_cost);
    out.buyer_utility += best_q[j] * (b.valuation - out.price);
  }
  return out;
}

/// Uniform task-level draw of max(0, sum(committed) - capacity) volunteered tasks.
inline std::vector<int> select_volunteers(std::span<const int> committed, int capacity, Rng& rng, long* ops = nullptr) {
  std::vector<int> out(committed.size(), 0);
  long total = 0;
  for (int c : committed) {
    if (c < 0) throw std::invalid_argument("committed task counts must be >= 0");
    total += c;
  }
  if (total <= capacity) return out;
  std::vector<int> owner;
  owner.reserve(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < committed.size(); ++i) owner.insert(owner.end(), static_cast<std::size_t>(committed[i]), static_cast<int>(i));
  const long draws = total - std::max(capacity, 0);
  // partial Fisher-Yates over the task multiset
  for (long d = 0; d < draws; ++d) {
    std::uniform_int_distribution<long> pick(d, total - 1);
    const long j = pick(rng);
    std::swap(owner[static_cast<std::size_t>(d)], owner[static_cast<std::size_t>(j)]);
    ++out[static_cast<std::size_t>(owner[static_cast<std::size_t>(d)])];
  }
  if (ops) *ops += draws;
  return out;
}

struct OccasionalBuyer {
  BuyerId id = 0;
  model::BuyerProfile profile;  // fixed channel gain
  int demand = 0;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double draw(Rng& rng) const { return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng); }
};

struct OccasionalModel {
  double arrival_rate = 20.0;  // mean number of arrivals per transaction
  int demand_min = 1;
  int demand_max = 10;
  Range compute_rate{1e9 / 600, 1.5e9 / 600};
  Range tx_power{0.5, 0.55};
  Range compute_power{0.45, 0.5};
  Range gain{100.0, 400.0};
};

struct Realization {
  std::vector<int> fb_demands;
  std::vector<double> fb_gains;
  std::vector<OccasionalBuyer> occasional;
};

/// Gains of fixed buyers, occasional arrivals and their demands for one
/// transaction; fixed-buyer demands come from the trace row.
inline Realization realize_demands(std::span<const int> fb_demands, std::span<const model::BuyerProfile> fb_profiles,
                                   const OccasionalModel& om, BuyerId first_occasional_id, Rng& rng) {
  if (fb_demands.size() != fb_profiles.size()) throw std::invalid_argument("one demand per fixed buyer is required");
  Realization r;
  r.fb_demands.assign(fb_demands.begin(), fb_demands.end());
  for (const auto& p : fb_profiles) {
    const auto& u = std::get<model::UniformGain>(p.channel);
    r.fb_gains.push_back(Range{u.mu1, u.mu2}.draw(rng));
  }
  const int arrivals = om.arrival_rate > 0 ? std::poisson_distribution<int>(om.arrival_rate)(rng) : 0;
  for (int k = 0; k < arrivals; ++k) {
    OccasionalBuyer b;
    b.id = first_occasional_id + k;
    b.profile.compute_rate = om.compute_rate.draw(rng);
    b.profile.tx_power = om.tx_power.draw(rng);
    b.profile.compute_power = om.compute_power.draw(rng);
    b.profile.channel = model::FixedGain{om.gain.draw(rng)};
    b.demand = std::uniform_int_distribution<int>(om.demand_min, om.demand_max)(rng);
    r.occasional.push_back(b);
  }
  return r;
}

/// Seller-side cash flows of one transaction, posted task by task.
struct CashLedger {
  double contract_payments = 0.0;    // price received from buyers whose demand exceeded their contract
  double underuse_penalties = 0.0;   // penalties received for unused contracted tasks
  double volunteer_charges = 0.0;    // compensation, refunded price and waived penalty per volunteered task
  double processing_costs = 0.0;     // unit cost of tasks the seller is paid to process
  double avoided_costs = 0.0;        // unit cost not spent on volunteered tasks
  double spot_payments = 0.0;
  double spot_costs = 0.0;

  double seller_revenue() const {
    return contract_payments + underuse_penalties - volunteer_charges - processing_costs + avoided_costs +
           spot_payments - spot_costs;
  }
};

struct TransactionOutcome {
  std::vector<int> realized_demands;
  std::vector<int> committed;
  std::vector<int> volunteer_tasks;
  int residual_supply = 0;
  std::vector<model::TemporaryContract> spot_contracts;
  double spot_price = 0.0;

  double fb_total_utility = 0.0;      // fixed buyers' sum utility including volunteer terms
  double seller_futures_utility = 0.0;
  double spot_buyer_utility = 0.0;
  double spot_seller_utility = 0.0;
  double buyer_total_utility() const { return fb_total_utility + spot_buyer_utility; }
  double seller_total_utility() const { return seller_futures_utility + spot_seller_utility; }

  int fulfilled_tasks = 0;  // N+
  int defaulted_tasks = 0;  // N-
  int contracted_tasks = 0;
  int served_tasks = 0;
  int interactions = 0;
  int spot_interactions = 0;
  std::vector<double> task_latencies_ms;
  double decision_ms = 0.0;
  long decision_ops = 0;
  long spot_visits = 0;
  long spot_visit_bound = 0;

  CashLedger ledger;
};

enum class SpotMode { none, residual };

struct TransactionConfig {
  model::SellerProfile seller;
  model::TaskConfig task;
  SpotGrid spot_grid;
  SpotMode spot_mode = SpotMode::residual;
  double latency_min_ms = 1.0;
  double latency_max_ms = 15.0;
};

namespace detail {

/// Adds the wall time of its lifetime to `ms`.
class DecisionTimer {
 public:
  explicit DecisionTimer(double& ms) : ms_(ms), start_(std::chrono::steady_clock::now()) {}
  ~DecisionTimer() { ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count(); }
  DecisionTimer(const DecisionTimer&) = delete;
  DecisionTimer& operator=(const DecisionTimer&) = delete;

 private:
  double& ms_;
  std::chrono::steady_clock::time_point start_;
};

inline void check(bool ok, const char* what) {
  if (!ok) throw std::logic_error(std::string("transaction invariant violated: ") + what);
}

inline double task_service_ms(const model::BuyerProfile& b, double gain, const model::ValuationContext& ctx) {
  return 1e3 * model::edge_completion_time(b, gain, ctx);
}

/// Adds per-task latencies: service time plus an equal share of the
/// transaction's negotiation latency.
inline void add_latencies(TransactionOutcome& out, const std::vector<double>& service_ms,
                          const std::vector<int>& served, const TransactionConfig& cfg, Rng& rng) {
  const long total = std::accumulate(served.begin(), served.end(), 0L);
  if (total == 0) return;
  double negotiation = 0.0;
  for (int k = 0; k < out.interactions; ++k) negotiation += Range{cfg.latency_min_ms, cfg.latency_max_ms}.draw(rng);
  const double share = negotiation / static_cast<double>(total);
  for (std::size_t k = 0; k < served.size(); ++k)
    out.task_latencies_ms.insert(out.task_latencies_ms.end(), static_cast<std::size_t>(served[k]), service_ms[k] + share);
}

}  // namespace detail

/// Executes one transaction under the given long-term contracts.
/// `extra_interactions` carries negotiation rounds attributed to this
/// transaction (e.g. a preceding futures negotiation).
inline TransactionOutcome execute_transaction(std::span<const model::LongTermContract> contracts,
                                              std::span<const model::BuyerProfile> fb_profiles,
                                              const Realization& realization, const TransactionConfig& cfg, Rng& rng,
                                              int extra_interactions = 0) {
  const std::size_t nf = contracts.size();
  if (realization.fb_demands.size() != nf || fb_profiles.size() != nf)
    throw std::invalid_argument("contracts, profiles and demands must align");
  const int cap = cfg.seller.capacity;
  const double c_unit = model::seller_unit_cost(cfg.seller, cfg.task);
  const model::ValuationContext vctx{cfg.task, cfg.seller.compute_rate};

  TransactionOutcome out;
  out.realized_demands = realization.fb_demands;
  out.committed.resize(nf);
  std::vector<double> fb_value(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    out.committed[i] = std::min(realization.fb_demands[i], contracts[i].quantity);
    fb_value[i] = model::unit_valuation(fb_profiles[i], realization.fb_gains[i], vctx);
  }
  {
    detail::DecisionTimer timer(out.decision_ms);
    out.volunteer_tasks = select_volunteers(out.committed, cap, rng, &out.decision_ops);
  }

  std::vector<model::FbSettlement> settle(nf);
  int volunteers = 0;
  for (std::size_t i = 0; i < nf; ++i) {
    settle[i] = {contracts[i], realization.fb_demands[i], fb_value[i], out.volunteer_tasks[i]};
    volunteers += out.volunteer_tasks[i];
  }
  out.fb_total_utility = model::fb_sum_utility(settle, contracts.empty() ? 0.0 : model::shared_terms(settle).seller_penalty, cap);
  out.seller_futures_utility = model::seller_futures_utility(settle, volunteers, c_unit);

  int served_futures = 0;
  for (std::size_t i = 0; i < nf; ++i) {
    const auto& c = contracts[i];
    const int r = realization.fb_demands[i];
    served_futures += out.committed[i] - out.volunteer_tasks[i];
    out.contracted_tasks += c.quantity;
    out.fulfilled_tasks += out.committed[i] - out.volunteer_tasks[i];
    out.defaulted_tasks += out.volunteer_tasks[i];
    if (!c.signed_contract()) continue;
    if (model::demand_exceeds(c, r)) {
      out.ledger.contract_payments += c.quantity * c.price;
      out.ledger.processing_costs += c.quantity * c_unit;
    } else {
      out.ledger.underuse_penalties += (c.quantity - r) * c.buyer_penalty;
      out.defaulted_tasks += c.quantity - r;
    }
    out.ledger.volunteer_charges += out.volunteer_tasks[i] * (c.seller_penalty + c.price + c.buyer_penalty);
    out.ledger.avoided_costs += out.volunteer_tasks[i] * c_unit;
  }
  out.residual_supply = cap - served_futures;
  detail::check(volunteers == std::max(0, std::accumulate(out.committed.begin(), out.committed.end(), 0) - cap),
                "volunteers must equal the overflow");
  detail::check(out.residual_supply >= 0, "residual supply must be >= 0");

  // buyers served in this transaction with their service times
  std::vector<double> service_ms;
  std::vector<int> served;
  for (std::size_t i = 0; i < nf; ++i) {
    service_ms.push_back(detail::task_service_ms(fb_profiles[i], realization.fb_gains[i], vctx));
    served.push_back(out.committed[i] - out.volunteer_tasks[i]);
  }

  if (cfg.spot_mode == SpotMode::residual) {
    std::vector<SpotBuyer> buyers;
    std::vector<double> buyer_service;
    for (std::size_t i = 0; i < nf; ++i) {
      const int extra = realization.fb_demands[i] - contracts[i].quantity;
      if (extra > 0) {
        buyers.push_back({contracts[i].buyer_id, true, extra, fb_value[i]});
        buyer_service.push_back(service_ms[i]);
      }
    }
    for (const auto& ob : realization.occasional) {
      const double gain = std::get<model::FixedGain>(ob.profile.channel).gain;
      buyers.push_back({ob.id, false, ob.demand, model::unit_valuation(ob.profile, gain, vctx)});
      buyer_service.push_back(detail::task_service_ms(ob.profile, gain, vctx));
    }
    SpotResult res;
    {
      detail::DecisionTimer timer(out.decision_ms);
      res = bin_tcd(buyers, out.residual_supply, cfg.spot_grid, c_unit);
    }
    out.decision_ops += res.ops;
    out.spot_visits = res.visits;
    out.spot_visit_bound = res.visit_bound;
    out.spot_contracts = res.contracts;
    out.spot_price = res.price;
    out.spot_buyer_utility = res.buyer_utility;
    out.spot_seller_utility = res.seller_utility;
    if (!buyers.empty() && out.residual_supply > 0) out.spot_interactions = static_cast<int>(buyers.size()) + 1;
    int spot_total = 0;
    for (const auto& c : res.contracts) {
      spot_total += c.quantity;
      out.ledger.spot_payments += c.quantity * c.price;
      out.ledger.spot_costs += c.quantity * c_unit;
      const auto it = std::find_if(buyers.begin(), buyers.end(), [&](const SpotBuyer& b) { return b.id == c.buyer_id; });
      service_ms.push_back(buyer_service[static_cast<std::size_t>(it - buyers.begin())]);
      served.push_back(c.quantity);
    }
    detail::check(spot_total <= out.residual_supply, "spot allocations exceed residual supply");
    out.served_tasks = served_futures + spot_total;
  } else {
    out.served_tasks = served_futures;
  }
  detail::check(out.served_tasks <= cap, "served tasks exceed capacity");

  // one contract-execution handshake when long-term contracts are in force
  const bool any_contract =
      std::any_of(contracts.begin(), contracts.end(), [](const auto& c) { return c.signed_contract(); });
  out.interactions = extra_interactions + out.spot_interactions + (any_contract ? 1 : 0);
  detail::add_latencies(out, service_ms, served, cfg, rng);
  return out;
}

/// Every transaction negotiated from scratch over full capacity, no contracts.
inline TransactionOutcome execute_spot_only(std::span<const model::BuyerProfile> fb_profiles,
                                            const Realization& realization, const TransactionConfig& cfg, Rng& rng) {
  const std::size_t nf = fb_profiles.size();
  const double c_unit = model::seller_unit_cost(cfg.seller, cfg.task);
  const model::ValuationContext vctx{cfg.task, cfg.seller.compute_rate};
  TransactionOutcome out;
  out.realized_demands = realization.fb_demands;
  out.committed.assign(nf, 0);
  out.volunteer_tasks.assign(nf, 0);
  out.residual_supply = cfg.seller.capacity;
  std::vector<SpotBuyer> buyers;
  std::vector<double> buyer_service;
  for (std::size_t i = 0; i < nf; ++i) {
    if (realization.fb_demands[i] <= 0) continue;
    buyers.push_back({static_cast<BuyerId>(i), true, realization.fb_demands[i],
                      model::unit_valuation(fb_profiles[i], realization.fb_gains[i], vctx)});
    buyer_service.push_back(detail::task_service_ms(fb_profiles[i], realization.fb_gains[i], vctx));
  }
  for (const auto& ob : realization.occasional) {
    const double gain = std::get<model::FixedGain>(ob.profile.channel).gain;
    buyers.push_back({ob.id, false, ob.demand, model::unit_valuation(ob.profile, gain, vctx)});
    buyer_service.push_back(detail::task_service_ms(ob.profile, gain, vctx));
  }
  SpotResult res;
  {
    detail::DecisionTimer timer(out.decision_ms);
    res = bin_tcd(buyers, out.residual_supply, cfg.spot_grid, c_unit);
  }
  out.decision_ops += res.ops;
  out.spot_visits = res.visits;
  out.spot_visit_bound = res.visit_bound;
  out.spot_contracts = res.contracts;
  out.spot_price = res.price;
  out.spot_buyer_utility = res.buyer_utility;
  out.spot_seller_utility = res.seller_utility;
  if (!buyers.empty() && out.residual_supply > 0) out.spot_interactions = static_cast<int>(buyers.size()) + 1;
  out.interactions = out.spot_interactions;
  std::vector<double> service_ms;
  std::vector<int> served;
  for (const auto& c : res.contracts) {
    out.served_tasks += c.quantity;
    out.ledger.spot_payments += c.quantity * c.price;
    out.ledger.spot_costs += c.quantity * c_unit;
    const auto it = std::find_if(buyers.begin(), buyers.end(), [&](const SpotBuyer& b) { return b.id == c.buyer_id; });
    service_ms.push_back(buyer_service[static_cast<std::size_t>(it - buyers.begin())]);
    served.push_back(c.quantity);
  }
  detail::check(out.served_tasks <= cfg.seller.capacity, "served tasks exceed capacity");
  detail::add_latencies(out, service_ms, served, cfg, rng);
  return out;
}

/// No negotiation: each buyer, in random order, gets a uniform quantity of
/// its demand (capped by what is left) at a uniform grid price.
inline TransactionOutcome execute_random(std::span<const model::BuyerProfile> fb_profiles,
                                         const Realization& realization, const TransactionConfig& cfg, Rng& rng) {
  const std::size_t nf = fb_profiles.size();
  const double c_unit = model::seller_unit_cost(cfg.seller, cfg.task);
  const model::ValuationContext vctx{cfg.task, cfg.seller.compute_rate};
  TransactionOutcome out;
  out.realized_demands = realization.fb_demands;
  out.committed.assign(nf, 0);
  out.volunteer_tasks.assign(nf, 0);
  struct Entry {
    SpotBuyer buyer;
    double service_ms;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < nf; ++i)
    entries.push_back({{static_cast<BuyerId>(i), true, realization.fb_demands[i],
                        model::unit_valuation(fb_profiles[i], realization.fb_gains[i], vctx)},
                       detail::task_service_ms(fb_profiles[i], realization.fb_gains[i], vctx)});
  for (const auto& ob : realization.occasional) {
    const double gain = std::get<model::FixedGain>(ob.profile.channel).gain;
    entries.push_back({{ob.id, false, ob.demand, model::unit_valuation(ob.profile, gain, vctx)},
                       detail::task_service_ms(ob.profile, gain, vctx)});
  }
  std::vector<double> service_ms;
  std::vector<int> served;
  {
    detail::DecisionTimer timer(out.decision_ms);
    std::shuffle(entries.begin(), entries.end(), rng);
    int left = cfg.seller.capacity;
    const int levels = cfg.spot_grid.price.levels();
    for (const auto& e : entries) {
      out.decision_ops += 2;
      const int q = std::uniform_int_distribution<int>(0, std::min(e.buyer.demand, left))(rng);
      const double p = cfg.spot_grid.price.at(std::uniform_int_distribution<int>(0, levels - 1)(rng));
      if (q == 0) continue;
      left -= q;
      out.spot_contracts.push_back({e.buyer.id, q, p});
      out.spot_buyer_utility += q * (e.buyer.valuation - p);
      out.spot_seller_utility += q * (p - c_unit);
      out.ledger.spot_payments += q * p;
      out.ledger.spot_costs += q * c_unit;
      out.served_tasks += q;
      service_ms.push_back(e.service_ms);
      served.push_back(q);
    }
  }
  out.residual_supply = cfg.seller.capacity;
  out.interactions = 1;
  detail::add_latencies(out, service_ms, served, cfg, rng);
  return out;
}

/// Difference between the posted cash flows and the closed-form seller utility.
inline double audit_gap(const TransactionOutcome& o) {
  return o.ledger.seller_revenue() - o.seller_total_utility();
}

}  // namespace edgemarket::spot
