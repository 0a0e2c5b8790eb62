#pragma once

// Contract-renewal agent: reputation score, reward, epsilon-greedy double-Q
// learning with experience replay and a softly updated target network.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemarket/nn.hpp"

namespace edgemarket::reputation {

using Rng = std::mt19937_64;

enum Action : int { kRenew = 0, kContinue = 1 };

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  long decay_steps = 500;

  /// Exponential interpolation from start to end over decay_steps calls.
  double at(long step) const {
    if (decay_steps <= 0 || start <= 0.0) return end;
    const double f = static_cast<double>(std::min(step, decay_steps)) / static_cast<double>(decay_steps);
    if (end <= 0.0) return step >= decay_steps ? 0.0 : start * (1.0 - f);
    return start * std::pow(end / start, f);
  }
};

struct RLConfig {
  double discount = 0.95;     // nu
  double soft_update = 0.01;  // mu
  EpsilonSchedule epsilon;
  double renew_penalty = -10.0;
  double w_fulfilled = 1.0;  // reputation weight on completed tasks
  double w_defaulted = 1.0;  // reputation weight on defaulted tasks
  double w_utility = 1.0;    // reward weight on total utility
  double w_reputation = 0.1;
  std::size_t replay_capacity = 10000;
  std::size_t minibatch = 32;
  double learning_rate = 1e-3;
  int horizon = 100;  // transactions per episode
  std::vector<int> hidden{64, 64};
  double reward_scale = 1.0;  // rewards are divided by this before learning
  bool adam = false;
  int max_renewals = 100;  // per episode
  int episodes = 30;
  // A renewal takes no transaction time, so by default its transition is not
  // discounted; true applies the discount to every transition.
  bool discount_renewals = false;
};

inline void validate(const RLConfig& c) {
  if (!(c.discount >= 0.0 && c.discount <= 1.0)) throw std::invalid_argument("rl.discount must lie in [0, 1]");
  if (!(c.soft_update > 0.0 && c.soft_update <= 1.0)) throw std::invalid_argument("rl.soft_update must lie in (0, 1]");
  if (!(c.renew_penalty < 0.0)) throw std::invalid_argument("rl.renew_penalty must be negative");
  if (c.w_fulfilled < 0 || c.w_defaulted < 0 || c.w_utility < 0 || c.w_reputation < 0)
    throw std::invalid_argument("rl weights must be >= 0");
  if (c.replay_capacity == 0 || c.minibatch == 0) throw std::invalid_argument("rl.replay_capacity and rl.minibatch must be positive");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("rl.learning_rate must be positive");
  if (c.horizon < 1) throw std::invalid_argument("rl.horizon must be >= 1");
  if (!(c.reward_scale > 0.0)) throw std::invalid_argument("rl.reward_scale must be positive");
  if (c.epsilon.start < 0 || c.epsilon.start > 1 || c.epsilon.end < 0 || c.epsilon.end > 1)
    throw std::invalid_argument("rl.epsilon bounds must lie in [0, 1]");
  for (int h : c.hidden)
    if (h < 1) throw std::invalid_argument("rl.hidden widths must be positive");
}

inline double reputation_value(long fulfilled, long defaulted, double w_fulfilled, double w_defaulted) {
  if (fulfilled < 0 || defaulted < 0) throw std::invalid_argument("task counts must be >= 0");
  return w_fulfilled * static_cast<double>(fulfilled) - w_defaulted * static_cast<double>(defaulted);
}

inline double reward(int action, double total_utility, double rep, const RLConfig& c) {
  if (action == kRenew) return c.renew_penalty;
  if (action != kContinue) throw std::invalid_argument("action must be 0 (renew) or 1 (continue)");
  return c.w_utility * total_utility + c.w_reputation * rep;
}

/// Observation after a transaction, each component scaled to roughly [-1, 1].
struct MarketState {
  std::vector<double> demand_vector;
  double total_utility = 0.0;
  double interaction_count = 0.0;
  double reputation = 0.0;

  std::vector<double> features() const {
    std::vector<double> f(demand_vector);
    f.push_back(total_utility);
    f.push_back(interaction_count);
    f.push_back(reputation);
    return f;
  }
};

struct Transition {
  std::vector<double> state;
  int action = kContinue;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  bool advances = true;  // false: no transaction elapsed (undiscounted)
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

  void push(Transition t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t k) const { return items_[k]; }

  /// Uniform sample with replacement.
  std::vector<const Transition*> sample(std::size_t k, Rng& rng) const {
    if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out;
    for (std::size_t j = 0; j < k; ++j) out.push_back(&items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

struct LearnerState {
  nn::Mlp online;
  nn::Mlp target;
  ReplayBuffer buffer;
  long steps = 0;  // act() calls so far
  double epsilon = 1.0;
  nn::Adam adam;
  bool use_adam = false;
};

inline LearnerState make_learner(int state_size, const RLConfig& c, Rng& rng) {
  validate(c);
  std::vector<int> sizes{state_size};
  sizes.insert(sizes.end(), c.hidden.begin(), c.hidden.end());
  sizes.push_back(2);
  LearnerState l;
  l.online = nn::Mlp(sizes, rng);
  l.target = l.online;
  l.buffer = ReplayBuffer(c.replay_capacity);
  l.epsilon = c.epsilon.at(0);
  l.use_adam = c.adam;
  return l;
}

inline int greedy_action(const std::vector<double>& q) { return q[kContinue] > q[kRenew] ? kContinue : kRenew; }

/// Epsilon-greedy choice; epsilon follows the schedule after each call.
inline int act(const MarketState& s, LearnerState& l, const RLConfig& c, Rng& rng) {
  int a;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < l.epsilon)
    a = std::uniform_int_distribution<int>(0, 1)(rng);
  else
    a = greedy_action(l.online.forward(s.features()));
  ++l.steps;
  l.epsilon = c.epsilon.at(l.steps);
  return a;
}

/// r + nu * Q_target(s', argmax_a Q_online(s', a)); terminal transitions give r.
/// Transitions that do not advance time use nu = 1.
inline double td_target(const Transition& t, const LearnerState& l, double discount) {
  if (!t.advances) discount = 1.0;
  if (t.terminal || discount == 0.0) return t.reward;
  const auto q_online = l.online.forward(t.next_state);
  const auto q_target = l.target.forward(t.next_state);
  return t.reward + discount * q_target[static_cast<std::size_t>(greedy_action(q_online))];
}

/// Mean squared TD error of a minibatch and its gradient w.r.t. the online network.
inline double td_loss(const LearnerState& l, const std::vector<const Transition*>& batch, double discount,
                      nn::Mlp* grad) {
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::Mlp::Trace trace;
  for (const auto* t : batch) {
    const double y = td_target(*t, l, discount);
    const auto q = l.online.forward(t->state, grad ? &trace : nullptr);
    const double err = q[static_cast<std::size_t>(t->action)] - y;
    loss += err * err * inv;
    if (grad) {
      std::vector<double> d(q.size(), 0.0);
      d[static_cast<std::size_t>(t->action)] = 2.0 * err * inv;
      l.online.backward(trace, d, *grad);
    }
  }
  return loss;
}

/// One gradient step on the TD loss followed by the soft target update.
inline double learn_step(LearnerState& l, const std::vector<const Transition*>& batch, const RLConfig& c,
                         double learning_rate) {
  if (batch.empty()) throw std::invalid_argument("minibatch must be nonempty");
  nn::Mlp grad = nn::Mlp::zeros_like(l.online);
  const double loss = td_loss(l, batch, c.discount, &grad);
  nn::apply_gradient(l.online, grad, learning_rate, l.use_adam ? &l.adam : nullptr);
  nn::soft_update(l.target, l.online, c.soft_update);
  return loss;
}

// Snapshot: a text header line, then for each array "name rows cols" followed
// by rows*cols values.

inline void save_snapshot(const LearnerState& l, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot " + path);
  out << "edgemarket-snapshot v1\n";
  auto write = [&](const std::string& name, int rows, int cols, const std::vector<double>& v) {
    out << name << ' ' << rows << ' ' << cols << '\n';
    char buf[32];
    for (std::size_t k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", v[k]);
      out << buf << ((k + 1) % static_cast<std::size_t>(cols) == 0 ? '\n' : ' ');
    }
  };
  const char* names[] = {"online", "target"};
  const nn::Mlp* nets[] = {&l.online, &l.target};
  for (int n = 0; n < 2; ++n) {
    const auto& layers = nets[n]->layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
      write(std::string(names[n]) + ".layer" + std::to_string(k) + ".weight", layers[k].out, layers[k].in, layers[k].w);
      write(std::string(names[n]) + ".layer" + std::to_string(k) + ".bias", 1, layers[k].out, layers[k].b);
    }
  }
  if (!out) throw std::runtime_error("failed writing snapshot " + path);
}

inline LearnerState load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read snapshot " + path);
  std::string header;
  std::getline(in, header);
  if (header != "edgemarket-snapshot v1") throw std::runtime_error(path + ": not an edgemarket snapshot");
  LearnerState l;
  l.epsilon = 0.0;
  std::string name;
  int rows = 0, cols = 0;
  while (in >> name >> rows >> cols) {
    if (rows < 1 || cols < 1) throw std::runtime_error(path + ": bad array shape for " + name);
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v)
      if (!(in >> x)) throw std::runtime_error(path + ": truncated array " + name);
    const auto dot1 = name.find('.');
    const auto dot2 = name.rfind('.');
    if (dot1 == std::string::npos || dot2 == dot1) throw std::runtime_error(path + ": bad array name " + name);
    const std::string net = name.substr(0, dot1);
    const std::string layer = name.substr(dot1 + 1, dot2 - dot1 - 1);
    const std::string part = name.substr(dot2 + 1);
    if ((net != "online" && net != "target") || layer.rfind("layer", 0) != 0)
      throw std::runtime_error(path + ": unknown array " + name);
    auto& layers = (net == "online" ? l.online : l.target).layers();
    const auto k = static_cast<std::size_t>(std::stoi(layer.substr(5)));
    if (layers.size() <= k) layers.resize(k + 1);
    if (part == "weight") {
      layers[k].out = rows;
      layers[k].in = cols;
      layers[k].w = std::move(v);
    } else if (part == "bias") {
      layers[k].b = std::move(v);
    } else {
      throw std::runtime_error(path + ": unknown array " + name);
    }
  }
  if (l.online.layers().empty() || !nn::same_shape(l.online, l.target))
    throw std::runtime_error(path + ": online and target networks missing or mismatched");
  for (const auto* net : {&l.online, &l.target})
    for (const auto& layer : net->layers())
      if (layer.b.size() != static_cast<std::size_t>(layer.out)) throw std::runtime_error(path + ": bias size mismatch");
  return l;
}

}  // namespace edgemarket::reputation
