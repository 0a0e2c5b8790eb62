#pragma once

// Closed-form quantities of the trading market: task times, energies,
// per-task valuations, buyer/seller utilities.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace edgemarket {

using BuyerId = int;

namespace model {

struct TaskConfig {
  double data_size_bits = 1.5e6;
  double bandwidth_hz = 6e6;
  double w1 = 1.0;  // time-saving weight
  double w2 = 1.0;  // energy-saving weight
  double w3 = 1.0;  // seller energy-cost weight
};

struct FixedGain {
  double gain = 1.0;
};

struct UniformGain {
  double mu1 = 1.0;
  double mu2 = 1.0;
  double mean() const { return 0.5 * (mu1 + mu2); }
};

using ChannelModel = std::variant<FixedGain, UniformGain>;

struct BuyerProfile {
  double compute_rate = 1.0;   // bits/s
  double tx_power = 1.0;       // W
  double compute_power = 1.0;  // W
  ChannelModel channel = FixedGain{};
};

struct SellerProfile {
  double compute_rate = 1.0;   // bits/s
  double compute_power = 1.0;  // W
  int capacity = 0;            // resource blocks
  double hardware_unit_cost = 0.0;
  double desired_utility = 0.0;
};

/// Long-term (futures) contract. quantity == 0 means "no contract".
struct LongTermContract {
  BuyerId buyer_id = 0;
  int quantity = 0;
  double price = 0.0;
  double buyer_penalty = 0.0;   // paid by the buyer per unused contracted task
  double seller_penalty = 0.0;  // paid by the seller per volunteered task

  bool signed_contract() const { return quantity > 0; }
  friend bool operator==(const LongTermContract&, const LongTermContract&) = default;
};

struct TemporaryContract {
  BuyerId buyer_id = 0;
  int quantity = 0;
  double price = 0.0;
  friend bool operator==(const TemporaryContract&, const TemporaryContract&) = default;
};

/// Task parameters plus the seller's processing rate, which enters every
/// buyer's edge-completion time.
struct ValuationContext {
  TaskConfig task;
  double seller_compute_rate = 1.0;
};

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::domain_error(std::string(what) + " is not finite");
}

inline void validate(const TaskConfig& t) {
  require_finite(t.data_size_bits, "task.data_size_bits");
  require_finite(t.bandwidth_hz, "task.bandwidth_hz");
  if (t.data_size_bits <= 0 || t.bandwidth_hz <= 0)
    throw std::invalid_argument("task data size and bandwidth must be positive");
  if (t.w1 < 0 || t.w2 < 0 || t.w3 < 0) throw std::invalid_argument("task weights must be >= 0");
}

inline void validate(const BuyerProfile& b) {
  if (!(b.compute_rate > 0) || !(b.tx_power > 0) || !(b.compute_power > 0))
    throw std::invalid_argument("buyer rates and powers must be positive");
  if (const auto* u = std::get_if<UniformGain>(&b.channel)) {
    if (!(u->mu1 > 0) || u->mu1 > u->mu2) throw std::invalid_argument("uniform gain requires 0 < mu1 <= mu2");
  } else if (!(std::get<FixedGain>(b.channel).gain > 0)) {
    throw std::invalid_argument("fixed gain must be positive");
  }
}

inline void validate(const SellerProfile& s) {
  if (!(s.compute_rate > 0)) throw std::invalid_argument("seller compute rate must be positive");
  if (s.capacity < 0) throw std::invalid_argument("seller capacity must be >= 0");
  require_finite(s.hardware_unit_cost, "seller.hardware_unit_cost");
  require_finite(s.desired_utility, "seller.desired_utility");
}

/// Upload time of one task at SNR tx_power * gain.
inline double transmission_time(double tx_power, double gain, const TaskConfig& task) {
  return task.data_size_bits / (task.bandwidth_hz * std::log2(1.0 + tx_power * gain));
}

inline double edge_completion_time(const BuyerProfile& buyer, double gain, const ValuationContext& ctx) {
  return transmission_time(buyer.tx_power, gain, ctx.task) + ctx.task.data_size_bits / ctx.seller_compute_rate;
}

/// Per-task value of offloading: weighted time saving plus energy saving.
/// Negative when the channel is too poor for offloading to pay off.
inline double unit_valuation(const BuyerProfile& buyer, double gain, const ValuationContext& ctx) {
  require_finite(gain, "gain");
  if (!(gain > 0)) throw std::domain_error("channel gain must be positive");
  const auto& t = ctx.task;
  const double local_time = t.data_size_bits / buyer.compute_rate;
  const double upload = transmission_time(buyer.tx_power, gain, t);
  const double time_saving = local_time - (upload + t.data_size_bits / ctx.seller_compute_rate);
  const double energy_saving = buyer.compute_power * local_time - buyer.tx_power * upload;
  const double v = t.w1 * time_saving + t.w2 * energy_saving;
  require_finite(v, "valuation");
  return v;
}

/// Seller's cost of processing one task (energy plus hardware).
inline double seller_unit_cost(const SellerProfile& seller, const TaskConfig& task) {
  const double c = task.w3 * task.data_size_bits * seller.compute_power / seller.compute_rate +
                   seller.hardware_unit_cost;
  require_finite(c, "seller unit cost");
  return c;
}

/// 1 when realized demand exceeds the contracted quantity.
inline int demand_exceeds(const LongTermContract& c, int realized_demand) {
  return realized_demand > c.quantity ? 1 : 0;
}

/// Fixed buyer utility for one transaction, ignoring volunteering.
inline double fb_utility(const LongTermContract& c, int realized_demand, double valuation) {
  const double margin = valuation - c.price;
  if (demand_exceeds(c, realized_demand)) return c.quantity * margin;
  return realized_demand * margin - (c.quantity - realized_demand) * c.buyer_penalty;
}

/// One fixed buyer's realized position in a transaction.
struct FbSettlement {
  LongTermContract contract;
  int realized_demand = 0;
  double valuation = 0.0;
  int volunteer_tasks = 0;

  int committed() const { return std::min(realized_demand, contract.quantity); }
};

inline int overflow_count(std::span<const FbSettlement> fbs, int capacity) {
  long committed = 0;
  for (const auto& f : fbs) committed += f.committed();
  return committed > capacity ? static_cast<int>(committed - capacity) : 0;
}

inline void check_volunteers(std::span<const FbSettlement> fbs, int capacity) {
  long total = 0;
  for (const auto& f : fbs) {
    if (f.volunteer_tasks < 0 || f.volunteer_tasks > f.committed())
      throw std::invalid_argument("volunteer tasks must lie in [0, min(demand, quantity)]");
    total += f.volunteer_tasks;
  }
  if (total != overflow_count(fbs, capacity))
    throw std::invalid_argument("volunteer tasks do not match the overflow of committed tasks over capacity");
}

/// Sum utility of fixed buyers: own utilities, plus seller compensation for
/// volunteered tasks, minus the utility those volunteered tasks would have
/// carried. A buyer with no volunteered task contributes no volunteer term.
inline double fb_sum_utility(std::span<const FbSettlement> fbs, double seller_penalty, int capacity) {
  check_volunteers(fbs, capacity);
  double total = 0.0;
  long volunteers = 0;
  for (const auto& f : fbs) {
    total += fb_utility(f.contract, f.realized_demand, f.valuation);
    if (f.volunteer_tasks > 0) total -= fb_utility(f.contract, f.volunteer_tasks, f.valuation);
    volunteers += f.volunteer_tasks;
  }
  return total + static_cast<double>(volunteers) * seller_penalty;
}

/// Shared market terms of the signed contracts in a settlement list.
struct ContractTerms {
  double price = 0.0;
  double buyer_penalty = 0.0;
  double seller_penalty = 0.0;
  friend bool operator==(const ContractTerms&, const ContractTerms&) = default;
};

inline ContractTerms shared_terms(std::span<const FbSettlement> fbs) {
  const LongTermContract* ref = nullptr;
  for (const auto& f : fbs) {
    if (!f.contract.signed_contract()) continue;
    if (ref == nullptr) {
      ref = &f.contract;
    } else if (ref->price != f.contract.price || ref->buyer_penalty != f.contract.buyer_penalty ||
               ref->seller_penalty != f.contract.seller_penalty) {
      throw std::invalid_argument("signed contracts must share price and penalties");
    }
  }
  if (ref == nullptr) return {};
  return {ref->price, ref->buyer_penalty, ref->seller_penalty};
}

/// Seller's futures-stage utility: payments from buyers whose demand exceeds
/// their contract, under-use penalties from the rest, minus the cost of each
/// volunteered task.
inline double seller_futures_utility(std::span<const FbSettlement> fbs, int volunteer_count, double unit_cost) {
  if (volunteer_count < 0) throw std::invalid_argument("volunteer count must be >= 0");
  double total = 0.0;
  for (const auto& f : fbs) {
    const auto& c = f.contract;
    if (demand_exceeds(c, f.realized_demand))
      total += c.quantity * (c.price - unit_cost);
    else
      total += (c.quantity - f.realized_demand) * c.buyer_penalty;
  }
  if (volunteer_count > 0) {
    const ContractTerms t = shared_terms(fbs);
    total -= volunteer_count * (t.seller_penalty + (t.price - unit_cost) + t.buyer_penalty);
  }
  return total;
}

struct SpotUtilities {
  double buyers_total = 0.0;
  double seller_total = 0.0;
};

/// Spot-stage utilities; valuations[k] belongs to contracts[k].
inline SpotUtilities spot_utilities(std::span<const TemporaryContract> contracts, std::span<const double> valuations,
                                    double unit_cost) {
  if (contracts.size() != valuations.size())
    throw std::invalid_argument("one valuation per temporary contract is required");
  SpotUtilities u;
  for (std::size_t k = 0; k < contracts.size(); ++k) {
    const auto& c = contracts[k];
    if (c.quantity < 0 || c.price < 0) throw std::invalid_argument("temporary contract terms must be >= 0");
    u.buyers_total += c.quantity * (valuations[k] - c.price);
    u.seller_total += c.quantity * (c.price - unit_cost);
  }
  return u;
}

}  // namespace model
}  // namespace edgemarket
