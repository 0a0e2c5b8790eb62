#pragma once

// Episodic training of the renewal agent and the policies used at evaluation.

#include <chrono>
#include <functional>
#include <memory>
#include <vector>

#include "edgemarket/market.hpp"
#include "edgemarket/reputation.hpp"

namespace edgemarket::training {

/// Chooses renew/continue from a state; reports its own cost in ops.
struct Policy {
  std::function<int(const reputation::MarketState&)> decide;
  long ops_per_decision = 0;
};

inline Policy never_renew() {
  return {[](const reputation::MarketState&) { return static_cast<int>(reputation::kContinue); }, 0};
}

/// Greedy on the online network, no exploration.
inline Policy greedy(std::shared_ptr<const reputation::LearnerState> learner) {
  const long ops = learner->online.forward_ops();
  return {[learner](const reputation::MarketState& s) {
            return reputation::greedy_action(learner->online.forward(s.features()));
          },
          ops};
}

struct EpisodeSummary {
  std::vector<market::StepResult> steps;
  int renewals = 0;
};

/// Runs a session to its end, charging each decision's cost to the session.
inline EpisodeSummary run_policy(market::MarketSession& session, const Policy& policy) {
  EpisodeSummary out;
  while (!session.done()) {
    const auto start = std::chrono::steady_clock::now();
    const int a = policy.decide(session.state());
    const auto stop = std::chrono::steady_clock::now();
    out.steps.push_back(session.step(a, std::chrono::duration<double, std::milli>(stop - start).count(),
                                     policy.ops_per_decision));
  }
  out.renewals = session.renewals();
  return out;
}

struct TrainingResult {
  reputation::LearnerState learner;
  std::vector<double> episode_rewards;
  std::vector<int> episode_renewals;
  std::vector<double> losses;  // one per learning step
};

inline market::SessionOptions training_session_options(const reputation::RLConfig& rl) {
  market::SessionOptions o;
  o.spot_mode = spot::SpotMode::residual;
  o.allow_renewal = true;
  o.max_renewals = rl.max_renewals;
  o.rl = rl;
  return o;
}

/// Each episode runs on a fresh instance of the scenario with rl.horizon
/// transactions; renewals do not consume transactions.
inline TrainingResult run_training(const market::MarketScenario& scenario, const reputation::RLConfig& rl,
                                   std::uint64_t seed, int episodes) {
  reputation::validate(rl);
  if (episodes < 1) throw std::invalid_argument("training needs at least one episode");
  market::MarketScenario sc = scenario;
  sc.transactions = rl.horizon;
  market::validate(sc);
  reputation::Rng rng(market::derive_seed(seed, 41));
  TrainingResult out;
  auto cache = std::make_shared<market::NegotiationCache>();
  bool initialized = false;
  for (int ep = 0; ep < episodes; ++ep) {
    const auto inst = market::make_instance(sc, market::derive_seed(seed, 42, static_cast<std::uint64_t>(ep)));
    market::MarketSession session(sc, inst, training_session_options(rl), cache);
    if (!initialized) {
      out.learner = reputation::make_learner(static_cast<int>(session.state().features().size()), rl, rng);
      initialized = true;
    }
    double total = 0.0;
    auto s = session.state().features();
    while (!session.done()) {
      const auto step = session.step(reputation::act(session.state(), out.learner, rl, rng));
      total += step.reward;
      auto next = session.state().features();
      out.learner.buffer.push(
          {s, step.renewed ? reputation::kRenew : reputation::kContinue, step.reward / rl.reward_scale, next,
           step.terminal, step.transaction || rl.discount_renewals});
      if (out.learner.buffer.size() >= rl.minibatch)
        out.losses.push_back(reputation::learn_step(out.learner, out.learner.buffer.sample(rl.minibatch, rng), rl,
                                                    rl.learning_rate));
      s = std::move(next);
    }
    out.episode_rewards.push_back(total);
    out.episode_renewals.push_back(session.renewals());
  }
  return out;
}

}  // namespace edgemarket::training
