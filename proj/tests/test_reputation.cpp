#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "edgemarket/config.hpp"
#include "edgemarket/reputation.hpp"
#include "edgemarket/training.hpp"

using namespace edgemarket;
using namespace edgemarket::reputation;

namespace {

/// Three-input network whose outputs are its biases: Q = [renew, continue].
LearnerState constant_learner(double renew, double cont, double target_renew, double target_cont) {
  Rng rng(1);
  RLConfig c;
  c.hidden = {};
  auto l = make_learner(3, c, rng);
  auto set = [](nn::Mlp& m, double a, double b) {
    auto& layer = m.layers()[0];
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    layer.b = {a, b};
  };
  set(l.online, renew, cont);
  set(l.target, target_renew, target_cont);
  return l;
}

Transition transition(double reward, bool terminal = false, bool advances = true) {
  return {{0, 0, 0}, kContinue, reward, {0, 0, 0}, terminal, advances};
}

double distance(const nn::Mlp& a, const nn::Mlp& b) {
  const auto x = nn::flatten(a), y = nn::flatten(b);
  double s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

config::MarketConfig desk() { return config::load(std::string(EDGEMARKET_CONFIG_DIR) + "/desk.conf"); }

}  // namespace

TEST(Reputation, WeightedDifference) {
  EXPECT_DOUBLE_EQ(reputation_value(10, 3, 1, 2), 4.0);
  EXPECT_DOUBLE_EQ(reputation_value(0, 0, 1, 1), 0.0);
  EXPECT_THROW(reputation_value(-1, 0, 1, 1), std::invalid_argument);
}

TEST(Reward, RenewPaysThePenalty) {
  RLConfig c;
  c.renew_penalty = -7;
  c.w_utility = 2;
  c.w_reputation = 0.5;
  EXPECT_EQ(reward(kRenew, 100, 100, c), -7.0);
  EXPECT_DOUBLE_EQ(reward(kContinue, 3, 4, c), 8.0);
  EXPECT_THROW(reward(2, 0, 0, c), std::invalid_argument);
}

TEST(Epsilon, DecaysFromStartToEnd) {
  EpsilonSchedule e{1.0, 0.05, 500};
  EXPECT_DOUBLE_EQ(e.at(0), 1.0);
  EXPECT_NEAR(e.at(500), 0.05, 1e-12);
  EXPECT_NEAR(e.at(5000), 0.05, 1e-12);
  for (long s = 1; s <= 500; ++s) EXPECT_LE(e.at(s), e.at(s - 1));
}

TEST(Act, UniformWhenFullyExploring) {
  auto l = constant_learner(0, 1, 0, 0);
  RLConfig c;
  c.epsilon = {1.0, 1.0, 0};
  Rng rng(2);
  const int n = 20000;
  int renew = 0;
  for (int k = 0; k < n; ++k) renew += act({{}, 0, 0, 0}, l, c, rng) == kRenew;
  EXPECT_NEAR(static_cast<double>(renew) / n, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(Act, GreedyWithoutExploration) {
  RLConfig c;
  c.epsilon = {0.0, 0.0, 0};
  Rng rng(3);
  auto a = constant_learner(2, 5, 0, 0);
  a.epsilon = 0;
  EXPECT_EQ(act({{}, 0, 0, 0}, a, c, rng), kContinue);
  auto b = constant_learner(5, 2, 0, 0);
  b.epsilon = 0;
  EXPECT_EQ(act({{}, 0, 0, 0}, b, c, rng), kRenew);
}

TEST(TdTarget, DiscountedTargetValue) {
  const auto l = constant_learner(1, 4, 3, 4);
  EXPECT_NEAR(td_target(transition(1.0), l, 0.9), 4.6, 1e-12);
  EXPECT_EQ(td_target(transition(1.0), l, 0.0), 1.0);
  EXPECT_EQ(td_target(transition(1.0, true), l, 0.9), 1.0);
}

TEST(TdTarget, OnlineChoosesTargetEvaluates) {
  // online prefers renew, so the target's renew value is used even though its continue value is larger
  const auto l = constant_learner(5, 2, 1.5, 4);
  EXPECT_NEAR(td_target(transition(1.0), l, 0.9), 2.35, 1e-12);
}

TEST(TdTarget, RenewalsAreNotDiscounted) {
  const auto l = constant_learner(5, 2, 1.5, 4);
  EXPECT_NEAR(td_target(transition(1.0, false, false), l, 0.9), 2.5, 1e-12);
  EXPECT_EQ(td_target(transition(1.0, true, false), l, 0.9), 1.0);
}

TEST(SoftUpdate, BlendsAndCopies) {
  auto l = constant_learner(1, 1, 0, 0);
  nn::soft_update(l.target, l.online, 0.1);
  EXPECT_NEAR(l.target.layers()[0].b[0], 0.1, 1e-15);
  nn::soft_update(l.target, l.online, 1.0);
  EXPECT_EQ(nn::flatten(l.target), nn::flatten(l.online));
}

TEST(SoftUpdate, ContractsTowardOnline) {
  Rng rng(4);
  RLConfig c;
  c.hidden = {5};
  auto a = make_learner(3, c, rng);
  auto b = make_learner(3, c, rng);
  const double before = distance(b.online, a.online);
  nn::soft_update(b.online, a.online, 0.01);
  EXPECT_NEAR(distance(b.online, a.online), 0.99 * before, 1e-12);
  EXPECT_THROW(nn::soft_update(b.online, a.online, 0.0), std::invalid_argument);
}

TEST(TdLoss, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  RLConfig c;
  c.hidden = {6, 5};
  auto l = make_learner(4, c, rng);
  // perturb the target so it differs from the online network
  for (auto& layer : l.target.layers())
    for (auto& w : layer.w) w *= 0.7;
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Transition> ts;
  for (int k = 0; k < 8; ++k) {
    Transition t;
    for (int j = 0; j < 4; ++j) {
      t.state.push_back(u(rng));
      t.next_state.push_back(u(rng));
    }
    t.action = k % 2;
    t.reward = u(rng);
    t.terminal = k == 3;
    t.advances = k != 5;
    ts.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  std::vector<double> y;
  for (const auto* t : batch) y.push_back(td_target(*t, l, 0.9));
  // semi-gradient: targets held fixed
  auto loss_at = [&](const nn::Mlp& net) {
    double s = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const double e = net.forward(batch[k]->state)[static_cast<std::size_t>(batch[k]->action)] - y[k];
      s += e * e;
    }
    return s / static_cast<double>(batch.size());
  };
  nn::Mlp grad = nn::Mlp::zeros_like(l.online);
  EXPECT_NEAR(td_loss(l, batch, 0.9, &grad), loss_at(l.online), 1e-12);
  const auto g = nn::flatten(grad);
  std::size_t k = 0;
  double worst = 0;
  nn::Mlp probe = l.online;
  probe.for_each_parameter([&](double& p) {
    const double h = 1e-6, keep = p;
    p = keep + h;
    const double up = loss_at(probe);
    p = keep - h;
    const double down = loss_at(probe);
    p = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::fabs(fd - g[k]) / std::max(1e-6, std::fabs(fd) + std::fabs(g[k])));
    ++k;
  });
  EXPECT_LT(worst, 1e-4);
}

TEST(ReplayBuffer, DropsOldestWhenFull) {
  ReplayBuffer b(3);
  Rng rng(6);
  EXPECT_THROW(b.sample(1, rng), std::logic_error);
  for (int k = 0; k < 5; ++k) b.push(transition(k));
  ASSERT_EQ(b.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(b[k].reward, static_cast<double>(k + 2));
  for (const auto* t : b.sample(50, rng)) EXPECT_GE(t->reward, 2.0);
}

TEST(Snapshot, RoundTripsBothNetworks) {
  Rng rng(7);
  RLConfig c;
  c.hidden = {4, 3};
  auto l = make_learner(5, c, rng);
  for (auto& layer : l.target.layers())
    for (auto& b : layer.b) b = 0.125;
  const auto path = (std::filesystem::temp_directory_path() / "edgemarket_snapshot_test.txt").string();
  save_snapshot(l, path);
  const auto r = load_snapshot(path);
  std::filesystem::remove(path);
  EXPECT_EQ(nn::flatten(r.online), nn::flatten(l.online));
  EXPECT_EQ(nn::flatten(r.target), nn::flatten(l.target));
  EXPECT_THROW(load_snapshot("/nonexistent/snapshot"), std::runtime_error);
}

TEST(Learner, ConvergesOnATwoArmedProblem) {
  // one state, renew pays -1 and continue +1, every transition terminal
  RLConfig c;
  c.hidden = {8};
  c.learning_rate = 0.05;
  c.adam = true;
  Rng rng(8);
  auto l = make_learner(1, c, rng);
  for (int a = 0; a < 2; ++a) l.buffer.push({{1.0}, a, a == kRenew ? -1.0 : 1.0, {1.0}, true, true});
  for (int k = 0; k < 2000; ++k) learn_step(l, l.buffer.sample(8, rng), c, c.learning_rate);
  const auto q = l.online.forward(std::vector<double>{1.0});
  EXPECT_NEAR(q[kRenew], -1.0, 0.05);
  EXPECT_NEAR(q[kContinue], 1.0, 0.05);
}

TEST(Training, BitReproducible) {
  const auto cfg = desk();
  auto rl = cfg.rl;
  rl.horizon = 8;
  const auto a = training::run_training(cfg.scenario, rl, 11, 2);
  const auto b = training::run_training(cfg.scenario, rl, 11, 2);
  EXPECT_EQ(nn::flatten(a.learner.online), nn::flatten(b.learner.online));
  EXPECT_EQ(a.episode_rewards, b.episode_rewards);
  EXPECT_EQ(a.episode_renewals, b.episode_renewals);
  EXPECT_EQ(a.losses, b.losses);
}

TEST(Training, HeavyPenaltySuppressesRenewals) {
  const auto cfg = desk();
  auto rl = cfg.rl;
  rl.renew_penalty = -1e4;
  rl.reward_scale = 1e4;
  rl.adam = true;
  rl.epsilon = {1.0, 0.05, 100};
  const auto res = training::run_training(cfg.scenario, rl, 12, 6);
  auto learner = std::make_shared<const LearnerState>(res.learner);
  int renewals = 0, steps = 0;
  for (int run = 0; run < 3; ++run) {
    const auto inst = market::make_instance(cfg.scenario, 100 + static_cast<std::uint64_t>(run));
    market::SessionOptions so;
    so.rl = rl;
    market::MarketSession session(cfg.scenario, inst, so);
    const auto ep = training::run_policy(session, training::greedy(learner));
    renewals += ep.renewals;
    steps += static_cast<int>(ep.steps.size());
  }
  EXPECT_LT(renewals, 0.05 * steps);
}

TEST(Session, BlockedRenewalRunsATransaction) {
  const auto cfg = desk();
  const auto inst = market::make_instance(cfg.scenario, 5);
  market::SessionOptions so;
  so.rl = cfg.rl;
  market::MarketSession session(cfg.scenario, inst, so);
  EXPECT_FALSE(session.can_renew());
  auto r = session.step(kRenew);
  EXPECT_TRUE(r.transaction);
  EXPECT_FALSE(r.renewed);
  EXPECT_TRUE(session.can_renew());
  r = session.step(kRenew);
  EXPECT_TRUE(r.renewed);
  EXPECT_EQ(r.reward, cfg.rl.renew_penalty);
  EXPECT_EQ(session.executed(), 1);
  EXPECT_EQ(session.epochs().size(), 2u);
  EXPECT_FALSE(session.can_renew());
}
