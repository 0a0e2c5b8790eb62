#pragma once

// Expectation and risk engine for futures negotiation. Demand histories are
// treated as uniform categorical distributions, buyers as independent.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "edgemarket/model.hpp"
#include "edgemarket/pmf.hpp"

namespace edgemarket::stats {

/// Historical task counts of one fixed buyer.
class EmpiricalDemand {
 public:
  EmpiricalDemand() = default;
  explicit EmpiricalDemand(std::vector<int> samples) : samples_(std::move(samples)) { rebuild(); }

  const std::vector<int>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  int min() const { return sorted_.front(); }
  int max() const { return sorted_.back(); }

  void append(int sample) {
    samples_.push_back(sample);
    rebuild();
  }
  void append(std::span<const int> more) {
    samples_.insert(samples_.end(), more.begin(), more.end());
    rebuild();
  }

  /// Number of samples strictly greater than n.
  std::size_t count_above(int n) const {
    return static_cast<std::size_t>(sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), n));
  }

  /// Distribution of a single draw.
  Pmf pmf() const { return committed_pmf(max()); }

  /// Distribution of min(draw, cap).
  Pmf committed_pmf(int cap) const {
    require_nonempty();
    const int lo = std::min(min(), cap);
    const int hi = std::min(max(), cap);
    std::vector<double> mass(static_cast<std::size_t>(hi - lo + 1), 0.0);
    const double w = 1.0 / static_cast<double>(sorted_.size());
    for (int s : sorted_) mass[static_cast<std::size_t>(std::min(s, cap) - lo)] += w;
    return Pmf(lo, std::move(mass));
  }

  void require_nonempty() const {
    if (samples_.empty()) throw std::invalid_argument("empirical demand history is empty");
  }

 private:
  void rebuild() {
    for (int s : samples_)
      if (s < 0) throw std::invalid_argument("demand samples must be >= 0");
    sorted_ = samples_;
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::vector<int> samples_;
  std::vector<int> sorted_;
};

struct RiskConfig {
  double rho1 = 0.3;
  double rho2 = 0.3;
  double rho3 = 0.3;
  double u_min = 0.01;
  double overbook_rate = 0.1;  // tau
};

inline void validate(const RiskConfig& r) {
  for (double rho : {r.rho1, r.rho2, r.rho3})
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("risk thresholds must lie in (0, 1]");
  if (!(r.u_min > 0.0)) throw std::invalid_argument("risk.u_min must be positive");
  if (!(r.overbook_rate >= 0.0)) throw std::invalid_argument("risk.overbook_rate must be >= 0");
}

/// Largest total contracted quantity allowed by the overbooking rate.
inline int overbooked_capacity(int capacity, double tau) {
  return static_cast<int>(std::floor((1.0 + tau) * capacity + 1e-9));
}

/// Probability that realized demand exceeds the contracted quantity.
inline double expect_alpha(const EmpiricalDemand& history, int quantity) {
  history.require_nonempty();
  return static_cast<double>(history.count_above(quantity)) / static_cast<double>(history.size());
}

inline double expected_demand(const EmpiricalDemand& history) {
  history.require_nonempty();
  const auto& s = history.samples();
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

/// Valuation at the mean channel gain (plug-in, not the true expectation of
/// the nonlinear valuation).
inline double expect_valuation(const model::BuyerProfile& buyer, const model::ValuationContext& ctx) {
  const auto* u = std::get_if<model::UniformGain>(&buyer.channel);
  if (u == nullptr) throw std::invalid_argument("expected valuation needs a uniform channel model");
  return model::unit_valuation(buyer, u->mean(), ctx);
}

/// Pr(V = k) for k = 0..size()-1, V the number of committed tasks beyond capacity.
struct OverflowDistribution {
  std::vector<double> probabilities{1.0};

  double at(int k) const {
    return k >= 0 && static_cast<std::size_t>(k) < probabilities.size() ? probabilities[static_cast<std::size_t>(k)]
                                                                       : 0.0;
  }
  int max_support() const { return static_cast<int>(probabilities.size()) - 1; }
  double mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < probabilities.size(); ++k) s += static_cast<double>(k) * probabilities[k];
    return s;
  }
  double total() const { return std::accumulate(probabilities.begin(), probabilities.end(), 0.0); }
};

namespace detail {

inline constexpr double kTrim = 1e-18;

inline void check_market(std::span<const EmpiricalDemand> histories, std::span<const int> quantities, int capacity) {
  if (histories.size() != quantities.size()) throw std::invalid_argument("one quantity per history is required");
  if (capacity < 0) throw std::invalid_argument("capacity must be >= 0");
  for (const auto& h : histories) h.require_nonempty();
  for (int n : quantities)
    if (n < 0) throw std::invalid_argument("contract quantities must be >= 0");
}

inline std::vector<Pmf> committed_pmfs(std::span<const EmpiricalDemand> histories, std::span<const int> quantities) {
  std::vector<Pmf> out;
  out.reserve(histories.size());
  for (std::size_t i = 0; i < histories.size(); ++i) out.push_back(histories[i].committed_pmf(quantities[i]));
  return out;
}

inline Pmf sum_pmf(std::span<const Pmf> parts) {
  Pmf acc = Pmf::point(0);
  for (const auto& p : parts) acc = convolve(acc, p).trim(kTrim);
  return acc;
}

/// Distribution of the sum of all parts except one, for every part.
inline std::vector<Pmf> leave_one_out(std::span<const Pmf> parts) {
  const std::size_t n = parts.size();
  std::vector<Pmf> prefix(n + 1), suffix(n + 1);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = convolve(prefix[i], parts[i]).trim(kTrim);
  for (std::size_t i = n; i-- > 0;) suffix[i] = convolve(suffix[i + 1], parts[i]).trim(kTrim);
  std::vector<Pmf> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(convolve(prefix[i], suffix[i + 1]).trim(kTrim));
  return out;
}

/// Pr(none of `own` tasks is among the `total - capacity` drawn for volunteering).
inline double spared_probability(int own, int others, int capacity, const LogFactorials& lf) {
  const int total = own + others;
  if (total <= capacity || own == 0) return 1.0;
  if (own > capacity) return 0.0;
  // prod_{t<own} (capacity - t) / (total - t)
  return std::exp(lf(capacity) - lf(capacity - own) - lf(total) + lf(others));
}

}  // namespace detail

inline OverflowDistribution overflow_from_sum(const Pmf& committed_sum, int capacity) {
  const int top = std::max(0, committed_sum.max() - capacity);
  OverflowDistribution out;
  out.probabilities.assign(static_cast<std::size_t>(top) + 1, 0.0);
  for (int s = committed_sum.min(); s <= committed_sum.max(); ++s) {
    const int v = std::max(0, s - capacity);
    out.probabilities[static_cast<std::size_t>(v)] += committed_sum.at(s);
  }
  return out;
}

/// Distribution of V = max(0, sum_i min(r_i, n_i) - capacity) over the joint
/// empirical demand distribution.
inline OverflowDistribution overflow_distribution(std::span<const EmpiricalDemand> histories,
                                                  std::span<const int> quantities, int capacity, double tau) {
  detail::check_market(histories, quantities, capacity);
  const long contracted = std::accumulate(quantities.begin(), quantities.end(), 0L);
  if (contracted > overbooked_capacity(capacity, tau))
    throw std::invalid_argument("contracted quantity exceeds the overbooked capacity");
  const auto parts = detail::committed_pmfs(histories, quantities);
  return overflow_from_sum(detail::sum_pmf(parts), capacity);
}

/// Hypergeometric pmf: `draws` tasks drawn without replacement from
/// `population`, of which `successes` belong to the buyer of interest.
inline std::vector<double> hypergeometric(int population, int successes, int draws, const LogFactorials& lf) {
  if (population < 0 || successes < 0 || draws < 0 || successes > population || draws > population)
    throw std::invalid_argument("hypergeometric arguments out of range");
  std::vector<double> out(static_cast<std::size_t>(std::min(successes, draws)) + 1, 0.0);
  const double denom = lf.log_choose(population, draws);
  for (int y = std::max(0, draws - (population - successes)); y <= std::min(successes, draws); ++y)
    out[static_cast<std::size_t>(y)] =
        std::exp(lf.log_choose(successes, y) + lf.log_choose(population - successes, draws - y) - denom);
  return out;
}

struct VolunteerDistribution {
  std::vector<double> probabilities{1.0};  // Pr(volunteered tasks = Y)

  double at(int y) const {
    return y >= 0 && static_cast<std::size_t>(y) < probabilities.size() ? probabilities[static_cast<std::size_t>(y)]
                                                                       : 0.0;
  }
  double mean() const {
    double s = 0.0;
    for (std::size_t y = 1; y < probabilities.size(); ++y) s += static_cast<double>(y) * probabilities[y];
    return s;
  }
  double prob_positive() const {
    double s = 0.0;
    for (std::size_t y = 1; y < probabilities.size(); ++y) s += probabilities[y];
    return s;
  }
};

/// Volunteer-count distribution of one buyer holding `own_committed` of the
/// `total_committed` committed tasks, with volunteers drawn uniformly at task level.
inline VolunteerDistribution volunteer_distribution(const OverflowDistribution& overflow, int own_committed,
                                                    int total_committed) {
  if (own_committed < 0 || total_committed < own_committed)
    throw std::invalid_argument("committed task counts out of range");
  if (overflow.max_support() > total_committed) {
    for (int k = total_committed + 1; k <= overflow.max_support(); ++k)
      if (overflow.at(k) > 0.0) throw std::invalid_argument("overflow exceeds the committed task count");
  }
  const LogFactorials lf(total_committed);
  VolunteerDistribution out;
  out.probabilities.assign(static_cast<std::size_t>(own_committed) + 1, 0.0);
  for (int k = 0; k <= std::min(overflow.max_support(), total_committed); ++k) {
    const double pk = overflow.at(k);
    if (pk == 0.0) continue;
    const auto h = hypergeometric(total_committed, own_committed, k, lf);
    for (std::size_t y = 0; y < h.size(); ++y) out.probabilities[y] += pk * h[y];
  }
  return out;
}

/// Overflow and per-buyer volunteer statistics for a quantity vector, each
/// buyer's committed count conditioned jointly with everyone else's.
struct OverflowStats {
  OverflowDistribution overflow;
  double expected_overflow = 0.0;
  std::vector<double> expected_volunteers;
  std::vector<double> volunteer_probability;  // Pr(volunteered tasks > 0)
};

inline OverflowStats overflow_stats(std::span<const EmpiricalDemand> histories, std::span<const int> quantities,
                                    int capacity) {
  detail::check_market(histories, quantities, capacity);
  const auto parts = detail::committed_pmfs(histories, quantities);
  OverflowStats out;
  out.overflow = overflow_from_sum(detail::sum_pmf(parts), capacity);
  out.expected_overflow = out.overflow.mean();
  out.expected_volunteers.assign(parts.size(), 0.0);
  out.volunteer_probability.assign(parts.size(), 0.0);
  if (out.overflow.max_support() == 0) return out;
  const auto others = detail::leave_one_out(parts);
  int top = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) top = std::max(top, parts[i].max() + others[i].max());
  const LogFactorials lf(std::max(top, capacity));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    double ev = 0.0, pv = 0.0;
    for (int a = std::max(parts[i].min(), 1); a <= parts[i].max(); ++a) {
      const double pa = parts[i].at(a);
      if (pa == 0.0) continue;
      for (int s = others[i].min(); s <= others[i].max(); ++s) {
        const int total = a + s;
        if (total <= capacity) continue;
        const double w = pa * others[i].at(s);
        if (w == 0.0) continue;
        ev += w * static_cast<double>(total - capacity) * a / total;
        pv += w * (1.0 - detail::spared_probability(a, s, capacity, lf));
      }
    }
    out.expected_volunteers[i] = ev;
    out.volunteer_probability[i] = pv;
  }
  return out;
}

/// Full per-buyer volunteer distributions (joint conditioning as in overflow_stats).
inline std::vector<VolunteerDistribution> volunteer_distributions(std::span<const EmpiricalDemand> histories,
                                                                  std::span<const int> quantities, int capacity) {
  detail::check_market(histories, quantities, capacity);
  const auto parts = detail::committed_pmfs(histories, quantities);
  const auto others = detail::leave_one_out(parts);
  std::vector<VolunteerDistribution> out(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const LogFactorials lf(parts[i].max() + others[i].max());
    out[i].probabilities.assign(static_cast<std::size_t>(parts[i].max()) + 1, 0.0);
    for (int a = parts[i].min(); a <= parts[i].max(); ++a) {
      for (int s = others[i].min(); s <= others[i].max(); ++s) {
        const double w = parts[i].at(a) * others[i].at(s);
        if (w == 0.0) continue;
        const int total = a + s;
        const int draws = std::max(0, total - capacity);
        const auto h = hypergeometric(total, a, draws, lf);
        for (std::size_t y = 0; y < h.size(); ++y) out[i].probabilities[y] += w * h[y];
      }
    }
  }
  return out;
}

/// Pr(buyer's volunteered tasks > 0) as a function of its own quantity n in
/// [n_lo, n_hi], everyone else held at `quantities`. Entry k is n = n_lo + k.
inline std::vector<double> volunteer_probability_by_quantity(std::span<const EmpiricalDemand> histories,
                                                             std::span<const int> quantities, std::size_t buyer,
                                                             int n_lo, int n_hi, int capacity) {
  detail::check_market(histories, quantities, capacity);
  if (buyer >= histories.size() || n_lo < 0 || n_hi < n_lo) throw std::invalid_argument("quantity range");
  std::vector<Pmf> parts;
  for (std::size_t j = 0; j < histories.size(); ++j)
    if (j != buyer) parts.push_back(histories[j].committed_pmf(quantities[j]));
  const Pmf others = detail::sum_pmf(parts);
  const LogFactorials lf(std::max(capacity, others.max() + n_hi));
  std::vector<double> out;
  for (int n = n_lo; n <= n_hi; ++n) {
    const Pmf own = histories[buyer].committed_pmf(n);
    double pv = 0.0;
    for (int a = std::max(own.min(), 1); a <= own.max(); ++a) {
      const double pa = own.at(a);
      if (pa == 0.0) continue;
      for (int s = std::max(others.min(), capacity + 1 - a); s <= others.max(); ++s)
        pv += pa * others.at(s) * (1.0 - detail::spared_probability(a, s, capacity, lf));
    }
    out.push_back(pv);
  }
  return out;
}

/// Expectation inputs for one fixed buyer under a candidate quantity.
struct FbExpectation {
  int quantity = 0;
  double e_alpha = 0.0;
  double e_demand = 0.0;
  double e_valuation = 0.0;
  double e_volunteers = 0.0;
};

/// Plug-in expected utility of one fixed buyer (no volunteering).
inline double expected_buyer_utility(const FbExpectation& fb, const model::ContractTerms& terms) {
  const double margin = fb.e_valuation - terms.price;
  return fb.e_alpha * fb.quantity * margin +
         (1.0 - fb.e_alpha) * (fb.e_demand * margin - (fb.quantity - fb.e_demand) * terms.buyer_penalty);
}

/// Expected sum utility of fixed buyers including volunteer compensation.
inline double expected_fb_sum_utility(std::span<const FbExpectation> fbs, const model::ContractTerms& terms,
                                      double expected_overflow) {
  double total = expected_overflow * terms.seller_penalty;
  for (const auto& fb : fbs) {
    const double margin = fb.e_valuation - terms.price;
    total += fb.e_alpha * ((fb.quantity - fb.e_volunteers) * margin);
    total += (1.0 - fb.e_alpha) * ((fb.e_demand - fb.e_volunteers) * margin +
                                   (fb.quantity - fb.e_demand - fb.e_volunteers) * terms.buyer_penalty);
  }
  return total;
}

/// Separable per-buyer part of the seller's expected utility.
inline double expected_seller_share(const FbExpectation& fb, const model::ContractTerms& terms, double unit_cost) {
  return fb.e_alpha * fb.quantity * (terms.price - unit_cost) +
         (1.0 - fb.e_alpha) * (fb.quantity - fb.e_demand) * terms.buyer_penalty;
}

/// Cost the seller bears per expected volunteered task.
inline double volunteer_unit_cost(const model::ContractTerms& terms, double unit_cost) {
  return terms.seller_penalty + (terms.price - unit_cost) + terms.buyer_penalty;
}

inline double expected_seller_utility(std::span<const FbExpectation> fbs, const model::ContractTerms& terms,
                                      double expected_overflow, double unit_cost) {
  double total = -expected_overflow * volunteer_unit_cost(terms, unit_cost);
  for (const auto& fb : fbs) total += expected_seller_share(fb, terms, unit_cost);
  return total;
}

struct BuyerRiskCheck {
  double expected_utility = 0.0;
  double volunteer_probability = 0.0;
  bool utility_ok = false;    // Markov-transformed utility-floor constraint
  bool volunteer_ok = false;  // volunteering-probability constraint
  bool passed() const { return utility_ok && volunteer_ok; }
};

inline bool utility_risk_ok(double expected_utility, const RiskConfig& risk) {
  return expected_utility / risk.u_min > 1.0 - risk.rho1;
}

inline bool volunteer_risk_ok(double volunteer_probability, const RiskConfig& risk) {
  return volunteer_probability <= risk.rho2;
}

inline BuyerRiskCheck check_buyer_risks(const FbExpectation& fb, const model::ContractTerms& terms,
                                        double volunteer_probability, const RiskConfig& risk) {
  BuyerRiskCheck c;
  c.expected_utility = expected_buyer_utility(fb, terms);
  c.volunteer_probability = volunteer_probability;
  c.utility_ok = utility_risk_ok(c.expected_utility, risk);
  c.volunteer_ok = volunteer_risk_ok(volunteer_probability, risk);
  return c;
}

inline bool check_seller_risk(double expected_seller_utility, const model::SellerProfile& seller, double rho3) {
  if (!(seller.desired_utility > 0.0)) throw std::domain_error("seller desired utility must be positive");
  return expected_seller_utility / seller.desired_utility > 1.0 - rho3;
}

}  // namespace edgemarket::stats
