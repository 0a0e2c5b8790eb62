#pragma once

// Futures-stage bilateral negotiation: every fixed buyer filters the contract
// grid through its own feasibility and risk gates, then the seller picks one
// market-wide (price, penalties) slice and a quantity per buyer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "edgemarket/model.hpp"
#include "edgemarket/pmf.hpp"
#include "edgemarket/stats.hpp"

namespace edgemarket::futures {

/// Descending grid max, max - step, ... down to min.
struct PriceLadder {
  double max = 10.0;
  double min = 1.0;
  double step = 1.0;

  int levels() const { return static_cast<int>(std::floor((max - min) / step + 1e-9)) + 1; }
  double at(int level) const { return max - level * step; }
};

inline void validate(const PriceLadder& l, const char* what) {
  if (!std::isfinite(l.max) || !std::isfinite(l.min) || !std::isfinite(l.step))
    throw std::invalid_argument(std::string(what) + ": bounds must be finite");
  if (l.min < 0 || l.max < l.min || !(l.step > 0))
    throw std::invalid_argument(std::string(what) + ": need 0 <= min <= max and step > 0");
}

struct QuantityBounds {
  int n_min = 1;
  int n_max = 1;
  int levels() const { return n_max - n_min + 1; }
};

/// Quantity bounds from the extremes of a demand history (never below one task).
inline QuantityBounds bounds_from_history(const stats::EmpiricalDemand& h) {
  h.require_nonempty();
  return {std::max(1, h.min()), std::max(1, h.max())};
}

struct NegotiationGrid {
  PriceLadder price{10.0, 1.0, 1.0};
  PriceLadder buyer_penalty{5.0, 1.0, 1.0};
  PriceLadder seller_penalty{5.0, 1.0, 1.0};
  std::vector<QuantityBounds> quantity;  // one entry per fixed buyer

  long slice_count() const {
    return static_cast<long>(price.levels()) * buyer_penalty.levels() * seller_penalty.levels();
  }
};

inline void validate(const NegotiationGrid& g) {
  validate(g.price, "grid.price");
  validate(g.buyer_penalty, "grid.buyer_penalty");
  validate(g.seller_penalty, "grid.seller_penalty");
  for (const auto& q : g.quantity)
    if (q.n_min < 1 || q.n_max < q.n_min) throw std::invalid_argument("grid quantity bounds need 1 <= n_min <= n_max");
}

struct FixedBuyer {
  BuyerId id = 0;
  model::BuyerProfile profile;
  stats::EmpiricalDemand history;
};

struct FuturesMarket {
  model::SellerProfile seller;
  model::TaskConfig task;
  std::vector<FixedBuyer> buyers;

  model::ValuationContext valuation_context() const { return {task, seller.compute_rate}; }
  std::vector<stats::EmpiricalDemand> histories() const {
    std::vector<stats::EmpiricalDemand> out;
    for (const auto& b : buyers) out.push_back(b.history);
    return out;
  }
};

/// Default grid with quantity bounds taken from each buyer's history.
inline NegotiationGrid grid_for(const FuturesMarket& m, NegotiationGrid base = {}) {
  base.quantity.clear();
  for (const auto& b : m.buyers) base.quantity.push_back(bounds_from_history(b.history));
  return base;
}

struct SliceKey {
  int price = 0;  // ladder levels, 0 = highest value
  int buyer_penalty = 0;
  int seller_penalty = 0;
  auto operator<=>(const SliceKey&) const = default;
};

struct Candidate {
  SliceKey slice;
  model::LongTermContract contract;
};

struct BuyerCandidates {
  BuyerId buyer_id = 0;
  std::vector<Candidate> candidates;
  long visits = 0;
  long visit_bound = 0;
};

struct CandidateSet {
  std::vector<BuyerCandidates> buyers;

  long visits() const {
    long s = 0;
    for (const auto& b : buyers) s += b.visits;
    return s;
  }
  long visit_bound() const {
    long s = 0;
    for (const auto& b : buyers) s += b.visit_bound;
    return s;
  }
};

/// Everything buyers and seller need from the statistics engine, computed
/// once per negotiation.
class NegotiationContext {
 public:
  NegotiationContext(const FuturesMarket& market, NegotiationGrid grid, stats::RiskConfig risk)
      : market_(&market), grid_(std::move(grid)), risk_(risk) {
    for (const auto& b : market.buyers) model::validate(b.profile);
    model::validate(market.task);
    model::validate(market.seller);
    stats::validate(risk_);
    if (grid_.quantity.empty() && !market.buyers.empty()) grid_ = grid_for(market, grid_);
    if (grid_.quantity.size() != market.buyers.size())
      throw std::invalid_argument("negotiation grid needs quantity bounds for every fixed buyer");
    validate(grid_);
    unit_cost_ = model::seller_unit_cost(market.seller, market.task);
    histories_ = market.histories();
    const auto ctx = market.valuation_context();
    buyers_.resize(market.buyers.size());
    for (std::size_t i = 0; i < market.buyers.size(); ++i) {
      auto& b = buyers_[i];
      const auto& h = market.buyers[i].history;
      b.e_valuation = stats::expect_valuation(market.buyers[i].profile, ctx);
      b.e_demand = stats::expected_demand(h);
      const auto& q = grid_.quantity[i];
      for (int n = q.n_min; n <= q.n_max; ++n) b.e_alpha.push_back(stats::expect_alpha(h, n));
      for (int n = 0; n <= q.n_max; ++n) b.committed.push_back(h.committed_pmf(n));
    }
    compute_volunteer_risk();
  }

  const FuturesMarket& market() const { return *market_; }
  const NegotiationGrid& grid() const { return grid_; }
  const stats::RiskConfig& risk() const { return risk_; }
  double unit_cost() const { return unit_cost_; }
  int capacity() const { return market_->seller.capacity; }
  int quantity_cap() const { return stats::overbooked_capacity(capacity(), risk_.overbook_rate); }
  std::size_t size() const { return buyers_.size(); }
  std::span<const stats::EmpiricalDemand> histories() const { return histories_; }

  stats::FbExpectation expectation(std::size_t i, int n) const {
    const auto& b = buyers_[i];
    const auto& q = grid_.quantity[i];
    return {n, b.e_alpha[static_cast<std::size_t>(n - q.n_min)], b.e_demand, b.e_valuation, 0.0};
  }
  double expected_valuation(std::size_t i) const { return buyers_[i].e_valuation; }

  /// Pr(volunteering) bound used by the buyer-side gate, with every other
  /// buyer at its largest quantity.
  double volunteer_risk(std::size_t i, int n) const {
    return buyers_[i].volunteer_risk[static_cast<std::size_t>(n - grid_.quantity[i].n_min)];
  }

  /// Distribution of min(demand, n) for buyer i, 0 <= n <= n_max.
  const stats::Pmf& committed(std::size_t i, int n) const { return buyers_[i].committed[static_cast<std::size_t>(n)]; }

 private:
  struct BuyerData {
    double e_valuation = 0.0;
    double e_demand = 0.0;
    std::vector<double> e_alpha;         // indexed by n - n_min
    std::vector<double> volunteer_risk;  // indexed by n - n_min
    std::vector<stats::Pmf> committed;   // indexed by n
  };

  void compute_volunteer_risk() {
    const std::size_t nb = buyers_.size();
    std::vector<stats::Pmf> parts;
    for (std::size_t i = 0; i < nb; ++i) parts.push_back(buyers_[i].committed.back());
    const stats::Pmf total = stats::detail::sum_pmf(parts);
    // Pr(any volunteer) at the reference profile bounds every buyer's risk at
    // every smaller quantity; exact per-buyer values are only needed when it
    // is too large.
    const double any = total.tail(capacity() + 1);
    if (any <= risk_.rho2) {
      for (std::size_t i = 0; i < nb; ++i) buyers_[i].volunteer_risk.assign(grid_.quantity[i].levels(), any);
      return;
    }
    const auto others = stats::detail::leave_one_out(parts);
    int top = capacity();
    for (std::size_t i = 0; i < nb; ++i) top = std::max(top, others[i].max() + grid_.quantity[i].n_max);
    const stats::LogFactorials lf(top);
    for (std::size_t i = 0; i < nb; ++i) {
      const auto& q = grid_.quantity[i];
      auto& out = buyers_[i].volunteer_risk;
      out.clear();
      for (int n = q.n_min; n <= q.n_max; ++n) {
        const stats::Pmf& own = buyers_[i].committed[static_cast<std::size_t>(n)];
        double pv = 0.0;
        for (int a = std::max(own.min(), 1); a <= own.max(); ++a) {
          const double pa = own.at(a);
          if (pa == 0.0) continue;
          for (int s = std::max(others[i].min(), capacity() + 1 - a); s <= others[i].max(); ++s)
            pv += pa * others[i].at(s) * (1.0 - stats::detail::spared_probability(a, s, capacity(), lf));
        }
        out.push_back(pv);
      }
    }
  }

  const FuturesMarket* market_;
  NegotiationGrid grid_;
  stats::RiskConfig risk_;
  double unit_cost_ = 0.0;
  std::vector<stats::EmpiricalDemand> histories_;
  std::vector<BuyerData> buyers_;
};

/// Buyer-side gates for one grid point: price within [unit cost, expected
/// valuation], utility floor, volunteering probability.
inline bool buyer_accepts(const NegotiationContext& ctx, std::size_t i, int n, const model::ContractTerms& terms) {
  if (terms.price < ctx.unit_cost() || terms.price > ctx.expected_valuation(i)) return false;
  const auto check =
      stats::check_buyer_risks(ctx.expectation(i, n), terms, ctx.volunteer_risk(i, n), ctx.risk());
  return check.passed();
}

inline BuyerCandidates enumerate_buyer_candidates(const NegotiationContext& ctx, std::size_t i) {
  const auto& g = ctx.grid();
  const auto& q = g.quantity.at(i);
  BuyerCandidates out;
  out.buyer_id = ctx.market().buyers.at(i).id;
  out.visit_bound = g.slice_count() * q.levels();
  for (int lp = 0; lp < g.price.levels(); ++lp) {
    for (int lq = 0; lq < g.buyer_penalty.levels(); ++lq) {
      for (int lt = 0; lt < g.seller_penalty.levels(); ++lt) {
        const model::ContractTerms terms{g.price.at(lp), g.buyer_penalty.at(lq), g.seller_penalty.at(lt)};
        for (int n = q.n_max; n >= q.n_min; --n) {
          ++out.visits;
          if (!buyer_accepts(ctx, i, n, terms)) continue;
          out.candidates.push_back(
              {{lp, lq, lt}, {out.buyer_id, n, terms.price, terms.buyer_penalty, terms.seller_penalty}});
        }
      }
    }
  }
  return out;
}

struct Selection {
  std::vector<model::LongTermContract> contracts;  // market order; quantity 0 = no contract
  model::ContractTerms terms;
  double expected_seller_utility = 0.0;
  double expected_overflow = 0.0;
  bool seller_risk_passed = false;
  long slices_evaluated = 0;
  long combinations_evaluated = 0;
};

namespace detail {

/// E[max(0, S - m)] for every integer m, from the pmf of S.
class ExcessTable {
 public:
  explicit ExcessTable(const stats::Pmf& s) : lo_(s.min()), mean_(s.mean()) {
    const auto& m = s.mass();
    values_.assign(m.size() + 1, 0.0);
    // values_[k] = E[max(0, S - (lo + k))]
    double tail = 0.0;
    for (std::size_t k = m.size(); k-- > 0;) {
      values_[k] = values_[k + 1] + tail;
      tail += m[k];
    }
  }
  double operator()(int m) const {
    if (m < lo_) return mean_ - m;
    const auto k = static_cast<std::size_t>(m - lo_);
    return k < values_.size() ? values_[k] : 0.0;
  }

 private:
  int lo_;
  double mean_;
  std::vector<double> values_;
};

struct SliceOptions {
  SliceKey key;
  model::ContractTerms terms;
  std::vector<std::vector<int>> quantities;  // per buyer, descending, without the null option
  std::vector<std::vector<double>> shares;   // separable seller utility per quantity
  std::vector<std::vector<std::uint8_t>> allowed;  // per buyer, indexed by quantity
  double upper_bound = 0.0;
  bool used = false;
};

struct Best {
  bool found = false;
  double value = 0.0;
  int total = 0;
  SliceKey key;
  std::vector<int> quantities;
  double expected_overflow = 0.0;
};

inline double tolerance(double a, double b) { return 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)}); }

/// Deterministic preference: utility, then utilization, then cheaper terms,
/// then larger quantities for earlier buyers.
inline bool better(double value, int total, const SliceKey& key, const std::vector<int>& q, const Best& best) {
  if (!best.found) return true;
  const double tol = tolerance(value, best.value);
  if (value > best.value + tol) return true;
  if (value < best.value - tol) return false;
  if (total != best.total) return total > best.total;
  // larger ladder level = lower value
  if (key.price != best.key.price) return key.price > best.key.price;
  if (key.buyer_penalty != best.key.buyer_penalty) return key.buyer_penalty > best.key.buyer_penalty;
  if (key.seller_penalty != best.key.seller_penalty) return key.seller_penalty > best.key.seller_penalty;
  return q > best.quantities;
}

inline double volunteer_cost(const model::ContractTerms& t, double unit_cost) {
  return stats::volunteer_unit_cost(t, unit_cost);
}

/// Exhaustive depth-first search over all quantity combinations of a slice.
inline void search_exhaustive(const NegotiationContext& ctx, const SliceOptions& s, Best& best, long& combos) {
  const std::size_t nb = s.quantities.size();
  const int cap = ctx.quantity_cap();
  const double k = volunteer_cost(s.terms, ctx.unit_cost());
  std::vector<int> chosen(nb, 0);
  std::vector<stats::Pmf> prefix(nb + 1);
  std::function<void(std::size_t, int, double)> rec = [&](std::size_t i, int total, double share) {
    if (i == nb) {
      ++combos;
      const double ev = prefix[nb].expected_excess(ctx.capacity());
      const double value = share - k * ev;
      if (better(value, total, s.key, chosen, best)) best = {true, value, total, s.key, chosen, ev};
      return;
    }
    // null contract first, then the recorded quantities
    chosen[i] = 0;
    prefix[i + 1] = prefix[i];
    rec(i + 1, total, share);
    for (std::size_t c = 0; c < s.quantities[i].size(); ++c) {
      const int n = s.quantities[i][c];
      if (total + n > cap) continue;
      chosen[i] = n;
      prefix[i + 1] = stats::convolve(prefix[i], ctx.committed(i, n)).trim(stats::detail::kTrim);
      rec(i + 1, total + n, share + s.shares[i][c]);
    }
    chosen[i] = 0;
  };
  rec(0, 0, 0.0);
}

/// Gauss-Seidel coordinate ascent for slices too large to enumerate. Each
/// buyer's move is evaluated exactly against the current others.
inline void search_coordinate(const NegotiationContext& ctx, const SliceOptions& s, std::vector<int> start, Best& best,
                              long& combos) {
  const std::size_t nb = s.quantities.size();
  const int cap = ctx.quantity_cap();
  const int r = ctx.capacity();
  const double k = volunteer_cost(s.terms, ctx.unit_cost());
  // project the warm start onto this slice's options
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& ok = s.allowed[i];
    if (start[i] < 0 || static_cast<std::size_t>(start[i]) >= ok.size() || !ok[static_cast<std::size_t>(start[i])])
      start[i] = 0;
  }
  int total = std::accumulate(start.begin(), start.end(), 0);
  for (std::size_t i = nb; total > cap && i-- > 0;) {
    total -= start[i];
    start[i] = 0;
  }
  std::vector<int> x = std::move(start);
  std::vector<std::vector<double>> share_by_n(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    share_by_n[i].assign(s.allowed[i].size(), 0.0);
    for (std::size_t c = 0; c < s.quantities[i].size(); ++c)
      share_by_n[i][static_cast<std::size_t>(s.quantities[i][c])] = s.shares[i][c];
  }
  auto share_of = [&](std::size_t i, int n) { return share_by_n[i][static_cast<std::size_t>(n)]; };
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool changed = false;
    std::vector<stats::Pmf> suffix(nb + 1);
    for (std::size_t i = nb; i-- > 0;)
      suffix[i] = stats::convolve(suffix[i + 1], ctx.committed(i, x[i])).trim(stats::detail::kTrim);
    stats::Pmf prefix;
    for (std::size_t i = 0; i < nb; ++i) {
      ++combos;
      const ExcessTable rest(suffix[i + 1]);
      const int amax = s.quantities[i].empty() ? 0 : s.quantities[i].front();
      // g[a] = E[V] when this buyer commits exactly a tasks
      std::vector<double> g(static_cast<std::size_t>(amax) + 1, 0.0);
      for (int a = 0; a <= amax; ++a) {
        double e = 0.0;
        for (int y = prefix.min(); y <= prefix.max(); ++y) {
          const double py = prefix.at(y);
          if (py != 0.0) e += py * rest(r - a - y);
        }
        g[static_cast<std::size_t>(a)] = e;
      }
      auto value_of = [&](int n) {
        const auto& pmf = ctx.committed(i, n);
        double ev = 0.0;
        for (int a = pmf.min(); a <= pmf.max(); ++a) ev += pmf.at(a) * g[static_cast<std::size_t>(a)];
        return share_of(i, n) - k * ev;
      };
      const int others = total - x[i];
      int best_n = x[i];
      double best_v = value_of(x[i]);
      for (int n : s.quantities[i]) {
        if (n == x[i] || others + n > cap) continue;
        const double v = value_of(n);
        if (v > best_v + tolerance(v, best_v) || (v >= best_v - tolerance(v, best_v) && n > best_n)) {
          best_v = v;
          best_n = n;
        }
      }
      if (best_n != 0 && value_of(0) > best_v + tolerance(0.0, best_v)) best_n = 0;
      if (best_n != x[i]) {
        changed = true;
        total = others + best_n;
        x[i] = best_n;
      }
      prefix = stats::convolve(prefix, ctx.committed(i, x[i])).trim(stats::detail::kTrim);
    }
    if (!changed) break;
  }
  stats::Pmf sum;
  double share = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    share += share_of(i, x[i]);
    sum = stats::convolve(sum, ctx.committed(i, x[i])).trim(stats::detail::kTrim);
  }
  const double ev = sum.expected_excess(r);
  const double value = share - k * ev;
  if (better(value, total, s.key, x, best)) best = {true, value, total, s.key, x, ev};
}

inline bool subset_of(const SliceOptions& a, const SliceOptions& b) {
  if (!b.used) return false;
  for (std::size_t i = 0; i < a.quantities.size(); ++i)
    for (int n : a.quantities[i])
      if (!b.allowed[i][static_cast<std::size_t>(n)]) return false;
  return true;
}

}  // namespace detail

struct SelectOptions {
  double exhaustive_limit = 2e5;  // combinations per slice searched exhaustively
};

inline Selection seller_select(const CandidateSet& candidates, const NegotiationContext& ctx,
                               SelectOptions opts = {}) {
  const std::size_t nb = ctx.size();
  if (candidates.buyers.size() != nb) throw std::invalid_argument("one candidate list per fixed buyer is required");
  const auto& g = ctx.grid();

  const int lq_count = g.buyer_penalty.levels();
  const int lt_count = g.seller_penalty.levels();
  auto flat = [&](const SliceKey& k) {
    return (static_cast<std::size_t>(k.price) * lq_count + k.buyer_penalty) * lt_count + k.seller_penalty;
  };
  std::vector<detail::SliceOptions> slices(static_cast<std::size_t>(g.slice_count()));
  for (std::size_t i = 0; i < nb; ++i) {
    for (const auto& c : candidates.buyers[i].candidates) {
      auto& s = slices.at(flat(c.slice));
      if (!s.used) {
        s.used = true;
        s.key = c.slice;
        s.terms = {c.contract.price, c.contract.buyer_penalty, c.contract.seller_penalty};
        s.quantities.resize(nb);
        s.shares.resize(nb);
        s.allowed.resize(nb);
        for (std::size_t j = 0; j < nb; ++j) s.allowed[j].assign(g.quantity[j].n_max + 1, 0);
      }
      s.quantities[i].push_back(c.contract.quantity);
      s.allowed[i].at(static_cast<std::size_t>(c.contract.quantity)) = 1;
      s.shares[i].push_back(stats::expected_seller_share(ctx.expectation(i, c.contract.quantity), s.terms,
                                                         ctx.unit_cost()));
    }
  }
  std::vector<detail::SliceOptions*> order;
  for (auto& s : slices) {
    if (!s.used) continue;
    for (std::size_t i = 0; i < nb; ++i) {
      double m = 0.0;
      for (double v : s.shares[i]) m = std::max(m, v);
      s.upper_bound += m;
    }
    order.push_back(&s);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return a->upper_bound > b->upper_bound;
  });

  Selection out;
  out.contracts.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) out.contracts[i].buyer_id = ctx.market().buyers[i].id;

  detail::Best best;
  std::vector<int> warm(nb, 0);
  for (const auto* s : order) {
    if (best.found && s->upper_bound < best.value - detail::tolerance(s->upper_bound, best.value)) break;
    // same candidates at a lower seller penalty are never worse
    bool dominated = false;
    for (int lt = s->key.seller_penalty + 1; lt < lt_count && !dominated; ++lt)
      dominated = detail::subset_of(*s, slices[flat({s->key.price, s->key.buyer_penalty, lt})]);
    if (dominated) continue;
    ++out.slices_evaluated;
    double combos = 1.0;
    for (const auto& q : s->quantities) combos *= static_cast<double>(q.size() + 1);
    if (combos <= opts.exhaustive_limit) {
      detail::search_exhaustive(ctx, *s, best, out.combinations_evaluated);
    } else {
      detail::search_coordinate(ctx, *s, warm, best, out.combinations_evaluated);
    }
    if (best.found) warm = best.quantities;
  }

  if (!best.found) return out;
  out.expected_seller_utility = best.value;
  out.expected_overflow = best.expected_overflow;
  out.seller_risk_passed = best.total > 0 && stats::check_seller_risk(best.value, ctx.market().seller, ctx.risk().rho3);
  if (!out.seller_risk_passed) return out;
  out.terms = {g.price.at(best.key.price), g.buyer_penalty.at(best.key.buyer_penalty),
               g.seller_penalty.at(best.key.seller_penalty)};
  for (std::size_t i = 0; i < nb; ++i) {
    if (best.quantities[i] == 0) continue;
    out.contracts[i] = {out.contracts[i].buyer_id, best.quantities[i], out.terms.price, out.terms.buyer_penalty,
                        out.terms.seller_penalty};
  }
  return out;
}

struct FuturesResult {
  std::vector<model::LongTermContract> contracts;
  Selection selection;
  int interactions = 0;
  long candidate_visits = 0;
  long visit_bound = 0;
  std::vector<long> buyer_visits;
  std::vector<long> buyer_visit_bounds;
};

inline FuturesResult negotiate_futures(const FuturesMarket& market, const NegotiationGrid& grid,
                                       const stats::RiskConfig& risk, SelectOptions opts = {}) {
  const NegotiationContext ctx(market, grid, risk);
  CandidateSet set;
  for (std::size_t i = 0; i < ctx.size(); ++i) set.buyers.push_back(enumerate_buyer_candidates(ctx, i));
  FuturesResult out;
  out.selection = seller_select(set, ctx, opts);
  out.contracts = out.selection.contracts;
  // one report per buyer plus the seller's decision broadcast
  out.interactions = static_cast<int>(market.buyers.size()) + 1;
  out.candidate_visits = set.visits();
  out.visit_bound = set.visit_bound();
  for (const auto& b : set.buyers) {
    out.buyer_visits.push_back(b.visits);
    out.buyer_visit_bounds.push_back(b.visit_bound);
  }
  return out;
}

}  // namespace edgemarket::futures
