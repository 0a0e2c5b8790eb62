#pragma once

// Small futures markets shared by the negotiation tests and the acceptance
// suite, with the matching oracle view of each buyer.

#include <algorithm>
#include <random>

#include "edgemarket/futures.hpp"
#include "oracles.hpp"

namespace desk {

using namespace edgemarket;

constexpr double kBaseValuation = 0.8456578;  // valuation of the reference buyer at w1 = w2 = 1

// Reference buyer: compute 2.5e6 bits/s, powers 0.5 W, gain uniform on [100, 400].
inline model::BuyerProfile reference_buyer() { return {2.5e6, 0.5, 0.5, model::UniformGain{100, 400}}; }

struct Desk {
  futures::FuturesMarket market;
  futures::NegotiationGrid grid;
  stats::RiskConfig risk;
  std::vector<oracle::Buyer> oracle_buyers;
  oracle::Ladder lp{10, 1, 1}, lq{5, 1, 1}, lt{5, 1, 1};
  double unit_cost = 0.0;
};

// Weights chosen so that every buyer's expected valuation equals `valuation`.
inline Desk make_desk(const oracle::Samples& hist, double valuation, double unit_cost, int capacity, double desired) {
  Desk d;
  const double w = valuation / kBaseValuation;
  d.market.task = {1.5e6, 6e6, w, w, 0.0};
  d.market.seller = {2.5e9, 0.7, capacity, unit_cost, desired};
  for (std::size_t i = 0; i < hist.size(); ++i)
    d.market.buyers.push_back({static_cast<BuyerId>(i), reference_buyer(), stats::EmpiricalDemand(hist[i])});
  d.unit_cost = unit_cost;
  const double ev = oracle::valuation(1.5e6, 6e6, 2.5e6, 2.5e9, 0.5, 0.5, 250, w, w);
  for (const auto& h : hist)
    d.oracle_buyers.push_back({h, ev, std::max(1, *std::min_element(h.begin(), h.end())),
                               std::max(1, *std::max_element(h.begin(), h.end()))});
  return d;
}

inline void set_quantities(Desk& d, const std::vector<futures::QuantityBounds>& q) {
  d.grid.quantity = q;
  for (std::size_t i = 0; i < q.size(); ++i) {
    d.oracle_buyers[i].n_min = q[i].n_min;
    d.oracle_buyers[i].n_max = q[i].n_max;
  }
}

inline void set_ladders(Desk& d, oracle::Ladder p, oracle::Ladder q, oracle::Ladder t) {
  d.lp = p;
  d.lq = q;
  d.lt = t;
  d.grid.price = {p.max, p.min, p.step};
  d.grid.buyer_penalty = {q.max, q.min, q.step};
  d.grid.seller_penalty = {t.max, t.min, t.step};
}

inline oracle::BestContracts brute_force(const Desk& d) {
  return oracle::best_contracts(d.oracle_buyers, d.lp, d.lq, d.lt, d.unit_cost, d.market.seller.capacity,
                                d.risk.overbook_rate, d.risk.rho1, d.risk.rho2, d.risk.u_min);
}

inline Desk random_desk(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nb(1, 3), len(1, 5), val(0, 8);
  oracle::Samples hist(static_cast<std::size_t>(nb(rng)));
  int top = 0;
  for (auto& h : hist) {
    h.resize(static_cast<std::size_t>(len(rng)));
    for (auto& x : h) x = val(rng);
    top += std::max(1, *std::max_element(h.begin(), h.end()));
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int capacity = std::max(1, std::uniform_int_distribution<int>(top / 2, top)(rng));
  Desk d = make_desk(hist, 1.0 + 7.0 * u(rng), 0.2 + 1.5 * u(rng), capacity, 2.0 + 10.0 * u(rng));
  set_ladders(d, {8, 2, 2}, {3, 1, 1}, {3, 1, 1});
  const double rho1[] = {0.3, 1.0}, rho2[] = {0.2, 0.5, 1.0}, tau[] = {0.0, 0.1, 0.5};
  d.risk = {rho1[rng() % 2], rho2[rng() % 3], 0.3, 0.01, tau[rng() % 3]};
  return d;
}

}  // namespace desk
