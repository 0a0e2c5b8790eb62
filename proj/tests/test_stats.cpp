#include <gtest/gtest.h>

#include <random>

#include "edgemarket/stats.hpp"
#include "oracles.hpp"

using namespace edgemarket;
using stats::EmpiricalDemand;

namespace {

std::vector<EmpiricalDemand> histories(const oracle::Samples& s) {
  std::vector<EmpiricalDemand> out;
  for (const auto& h : s) out.emplace_back(h);
  return out;
}

model::BuyerProfile uniform_buyer(double mu1, double mu2) { return {2.5e6, 0.5, 0.5, model::UniformGain{mu1, mu2}}; }

const model::ValuationContext kCtx{{1.5e6, 6e6, 1, 1, 1}, 2.5e9};

struct Instance {
  oracle::Samples hist;
  std::vector<int> n;
  int capacity;
};

// small random instance with sum(n) within (1 + tau) * capacity for tau = 1
Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> buyers(1, 3), len(1, 5), value(0, 6), qty(1, 6);
  Instance in;
  const int nb = buyers(rng);
  int total = 0;
  for (int i = 0; i < nb; ++i) {
    std::vector<int> h(static_cast<std::size_t>(len(rng)));
    for (auto& x : h) x = value(rng);
    in.hist.push_back(h);
    in.n.push_back(qty(rng));
    total += in.n.back();
  }
  in.capacity = std::max(1, std::uniform_int_distribution<int>((total + 1) / 2, total)(rng));
  return in;
}

}  // namespace

TEST(ExpectAlpha, WorkedExample) {
  EXPECT_EQ(stats::expect_alpha(EmpiricalDemand({2, 3, 4, 5}), 3), 0.5);
}

TEST(ExpectAlpha, Extremes) {
  const EmpiricalDemand h({1, 4, 2, 7});
  EXPECT_EQ(stats::expect_alpha(h, 7), 0.0);
  EXPECT_EQ(stats::expect_alpha(h, 50), 0.0);
  EXPECT_EQ(stats::expect_alpha(h, 0), 1.0);
  EXPECT_THROW(stats::expect_alpha(EmpiricalDemand(), 1), std::invalid_argument);
}

TEST(ExpectAlpha, NonincreasingInQuantity) {
  const EmpiricalDemand h({3, 9, 0, 4, 4, 12, 6});
  for (int n = 0; n < 14; ++n) EXPECT_GE(stats::expect_alpha(h, n), stats::expect_alpha(h, n + 1));
}

TEST(ExpectValuation, PlugInAtMeanGain) {
  EXPECT_NEAR(stats::expect_valuation(uniform_buyer(100, 400), kCtx), 0.8457, 1e-3);
  const auto degenerate = uniform_buyer(250, 250);
  EXPECT_EQ(stats::expect_valuation(degenerate, kCtx), model::unit_valuation(degenerate, 250, kCtx));
  const model::ValuationContext zero{{1.5e6, 6e6, 0, 0, 1}, 2.5e9};
  EXPECT_EQ(stats::expect_valuation(uniform_buyer(100, 400), zero), 0.0);
  EXPECT_THROW(stats::expect_valuation({2.5e6, 0.5, 0.5, model::FixedGain{250}}, kCtx), std::invalid_argument);
}

TEST(ExpectedDemand, Mean) {
  EXPECT_DOUBLE_EQ(stats::expected_demand(EmpiricalDemand({2, 3, 4, 5})), 3.5);
  EXPECT_DOUBLE_EQ(stats::expected_demand(EmpiricalDemand({9})), 9.0);
  EXPECT_DOUBLE_EQ(stats::expected_demand(EmpiricalDemand({0, 0})), 0.0);
}

TEST(OverflowDistribution, TwoCoinBuyers) {
  const auto h = histories({{0, 1}, {0, 1}});
  const std::vector<int> n{1, 1};
  const auto d = stats::overflow_distribution(h, n, 1, 1.0);
  EXPECT_NEAR(d.at(1), 0.25, 1e-15);
  EXPECT_NEAR(d.at(0), 0.75, 1e-15);
  EXPECT_NEAR(d.mean(), 0.25, 1e-15);
}

TEST(OverflowDistribution, NoOverflowWhenCapacitySuffices) {
  const auto h = histories({{3, 8}, {1, 9, 2}});
  const std::vector<int> n{4, 5};
  EXPECT_NEAR(stats::overflow_distribution(h, n, 9, 0.1).at(0), 1.0, 1e-12);
}

TEST(OverflowDistribution, DeterministicDemand) {
  const auto h = histories({{5}});
  const std::vector<int> n{5};
  EXPECT_NEAR(stats::overflow_distribution(h, n, 3, 1.0).at(2), 1.0, 1e-15);
}

TEST(OverflowDistribution, RejectsOverbookedQuantities) {
  const auto h = histories({{5}, {5}});
  const std::vector<int> n{5, 5};
  EXPECT_THROW(stats::overflow_distribution(h, n, 4, 0.1), std::invalid_argument);
}

TEST(OverflowDistribution, MatchesEnumerationAndIsNormalized) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const auto in = random_instance(rng);
    const auto h = histories(in.hist);
    const auto d = stats::overflow_distribution(h, in.n, in.capacity, 1.0);
    const auto ex = oracle::enumerate(in.hist, in.n, in.capacity);
    EXPECT_NEAR(d.total(), 1.0, 1e-9);
    const int tau_bound = in.capacity;  // floor(tau * capacity) with tau = 1
    EXPECT_LE(d.max_support(), std::max(tau_bound, 0));
    for (int k = 0; k <= std::max(d.max_support(), static_cast<int>(ex.overflow.size()) - 1); ++k)
      EXPECT_NEAR(d.at(k), k < static_cast<int>(ex.overflow.size()) ? ex.overflow[static_cast<std::size_t>(k)] : 0.0,
                  1e-12);
  }
}

TEST(VolunteerDistribution, TwoCoinBuyers) {
  const auto h = histories({{0, 1}, {0, 1}});
  const std::vector<int> n{1, 1};
  const auto joint = stats::volunteer_distributions(h, n, 1);
  EXPECT_NEAR(joint[0].at(1), 0.125, 1e-15);
  EXPECT_NEAR(joint[0].mean(), 0.125, 1e-15);
  // conditioned on both buyers committing one task when V = 1
  const auto overflow = stats::overflow_distribution(h, n, 1, 1.0);
  const auto single = stats::volunteer_distribution(overflow, 1, 2);
  EXPECT_NEAR(single.at(1), 0.125, 1e-15);
}

TEST(VolunteerDistribution, NoOverflowNoVolunteers) {
  const auto v = stats::volunteer_distribution(stats::OverflowDistribution{}, 4, 9);
  EXPECT_EQ(v.prob_positive(), 0.0);
}

TEST(VolunteerDistribution, SoleCandidate) {
  stats::OverflowDistribution o;
  o.probabilities = {0, 0, 0, 1.0};
  EXPECT_NEAR(stats::volunteer_distribution(o, 7, 7).at(3), 1.0, 1e-15);
  EXPECT_THROW(stats::volunteer_distribution(o, 8, 7), std::invalid_argument);
}

TEST(OverflowStats, MatchesEnumeration) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const auto in = random_instance(rng);
    const auto h = histories(in.hist);
    const auto s = stats::overflow_stats(h, in.n, in.capacity);
    const auto ex = oracle::enumerate(in.hist, in.n, in.capacity);
    const auto dists = stats::volunteer_distributions(h, in.n, in.capacity);
    EXPECT_NEAR(s.expected_overflow, ex.e_overflow, 1e-12);
    for (std::size_t i = 0; i < in.n.size(); ++i) {
      EXPECT_NEAR(s.expected_volunteers[i], ex.e_volunteers[i], 1e-12);
      EXPECT_NEAR(s.volunteer_probability[i], ex.p_volunteer[i], 1e-12);
      EXPECT_NEAR(dists[i].mean(), ex.e_volunteers[i], 1e-12);
      EXPECT_NEAR(dists[i].prob_positive(), ex.p_volunteer[i], 1e-12);
      EXPECT_NEAR(stats::expect_alpha(h[i], in.n[i]), ex.e_alpha[i], 1e-12);
    }
  }
}

TEST(OverflowStats, VolunteersSumToOverflow) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 300; ++rep) {
    const auto in = random_instance(rng);
    const auto h = histories(in.hist);
    const auto s = stats::overflow_stats(h, in.n, in.capacity);
    double sum = 0.0;
    for (double v : s.expected_volunteers) sum += v;
    EXPECT_NEAR(sum, s.expected_overflow, 1e-9);
  }
}

TEST(VolunteerProbabilityByQuantity, MatchesJointStats) {
  const auto h = histories({{2, 5, 7}, {1, 6}, {0, 3, 3, 8}});
  std::vector<int> n{4, 5, 6};
  const auto curve = stats::volunteer_probability_by_quantity(h, n, 1, 1, 6, 9);
  for (int q = 1; q <= 6; ++q) {
    n[1] = q;
    EXPECT_NEAR(curve[static_cast<std::size_t>(q - 1)], stats::overflow_stats(h, n, 9).volunteer_probability[1], 1e-12);
  }
}

TEST(ExpectedUtilities, SingleBuyerReductions) {
  const model::ContractTerms t{1.0, 0.5, 0.5};
  const stats::FbExpectation full{4, 1.0, 6.0, 2.5, 0.0};
  EXPECT_DOUBLE_EQ(stats::expected_fb_sum_utility(std::span(&full, 1), t, 0.0), 4 * 1.5);
  const stats::FbExpectation boundary{4, 0.0, 4.0, 2.5, 0.0};
  EXPECT_DOUBLE_EQ(stats::expected_fb_sum_utility(std::span(&boundary, 1), t, 0.0), 4 * 1.5);
  EXPECT_DOUBLE_EQ(stats::expected_seller_utility(std::span(&full, 1), t, 0.0, 0.4), 4 * 0.6);
  EXPECT_DOUBLE_EQ(stats::expected_seller_utility(std::span(&boundary, 1), t, 0.0, 0.4), 0.0);
  EXPECT_DOUBLE_EQ(stats::expected_seller_utility(std::span(&boundary, 1), t, 0.3, 0.4), -0.3 * (0.5 + 0.6 + 0.5));
}

TEST(ExpectedUtilities, TwoCoinBuyersByHand) {
  // E[alpha] = 0, E[r] = 0.5, E[V] = 0.25, E[v_i] = 0.125, v = 2, p = 1, penalties 0.5
  const auto h = histories({{0, 1}, {0, 1}});
  const std::vector<int> n{1, 1};
  const auto s = stats::overflow_stats(h, n, 1);
  std::vector<stats::FbExpectation> fb;
  for (std::size_t i = 0; i < 2; ++i)
    fb.push_back({1, stats::expect_alpha(h[i], 1), stats::expected_demand(h[i]), 2.0, s.expected_volunteers[i]});
  const model::ContractTerms t{1.0, 0.5, 0.5};
  EXPECT_NEAR(stats::expected_fb_sum_utility(fb, t, s.expected_overflow), 0.125 + 2 * (0.375 + 0.1875), 1e-12);
  EXPECT_NEAR(stats::expected_seller_utility(fb, t, s.expected_overflow, 0.4), -0.25 * 1.6 + 2 * 0.25, 1e-12);
}

TEST(BuyerRisks, Gates) {
  const stats::RiskConfig risk{0.3, 0.3, 0.3, 0.01, 0.1};
  const model::ContractTerms t{1.0, 0.0, 0.0};
  // E[u] = 0
  EXPECT_FALSE(stats::check_buyer_risks({2, 1.0, 3.0, 1.0, 0}, t, 0.0, risk).utility_ok);
  EXPECT_TRUE(stats::check_buyer_risks({2, 1.0, 3.0, 1.0, 0}, t, 0.0, risk).volunteer_ok);
  const stats::RiskConfig loose{0.3, 0.3, 0.3, 0.5, 0.1};
  // E[u] = 1
  const auto ok = stats::check_buyer_risks({1, 1.0, 3.0, 2.0, 0}, t, 0.3, loose);
  EXPECT_DOUBLE_EQ(ok.expected_utility, 1.0);
  EXPECT_TRUE(ok.passed());
  EXPECT_FALSE(stats::check_buyer_risks({1, 1.0, 3.0, 2.0, 0}, t, 0.31, loose).volunteer_ok);
}

TEST(BuyerRisks, UtilityGateMonotone) {
  const stats::RiskConfig risk{0.3, 0.3, 0.3, 0.01, 0.1};
  bool passed = false;
  for (double u = -1.0; u <= 1.0; u += 1e-4) {
    const bool ok = stats::utility_risk_ok(u, risk);
    EXPECT_FALSE(passed && !ok);
    passed = passed || ok;
  }
  EXPECT_TRUE(passed);
}

TEST(SellerRisk, Gate) {
  const model::SellerProfile s{2.5e9, 0.7, 600, 0.5, 2400};
  EXPECT_TRUE(stats::check_seller_risk(2400, s, 0.3));
  EXPECT_FALSE(stats::check_seller_risk(0, s, 0.3));
  EXPECT_TRUE(stats::check_seller_risk(1e-9, s, 1.0));
}

TEST(MonteCarloOracle, AgreesWithAnalyticWithinThreeStandardErrors) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    const auto in = random_instance(rng);
    const auto h = histories(in.hist);
    const auto s = stats::overflow_stats(h, in.n, in.capacity);
    const auto mc = oracle::sample(in.hist, in.n, in.capacity, 100000, 1000 + rep);
    EXPECT_LE(std::fabs(s.expected_overflow - mc.overflow.mean), 3 * mc.overflow.se + 1e-12);
    for (std::size_t i = 0; i < in.n.size(); ++i) {
      EXPECT_LE(std::fabs(stats::expect_alpha(h[i], in.n[i]) - mc.alpha[i].mean), 3 * mc.alpha[i].se + 1e-12);
      EXPECT_LE(std::fabs(s.expected_volunteers[i] - mc.volunteers[i].mean), 3 * mc.volunteers[i].se + 1e-12);
    }
  }
}

TEST(MonteCarloOracle, WorkedExamples) {
  const auto coin = oracle::sample({{0, 1}, {0, 1}}, {1, 1}, 1, 100000, 4);
  EXPECT_NEAR(coin.overflow.mean, 0.25, 0.01);
  const auto alpha = oracle::sample({{2, 3, 4, 5}}, {3}, 100, 100000, 5);
  EXPECT_NEAR(alpha.alpha[0].mean, 0.5, 0.02);
  const auto det = oracle::sample({{4}, {6}}, {4, 5}, 7, 1000, 6);
  EXPECT_EQ(det.overflow.se, 0.0);
  EXPECT_EQ(det.overflow.mean, stats::overflow_stats(histories({{4}, {6}}), std::vector<int>{4, 5}, 7).expected_overflow);
}

TEST(MarketScaleOracle, AgreesWithEnumeration) {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 200; ++rep) {
    const auto in = random_instance(rng);
    const auto ex = oracle::enumerate(in.hist, in.n, in.capacity);
    const auto mr = oracle::market_risk(in.hist, in.n, in.capacity);
    EXPECT_NEAR(mr.e_overflow, ex.e_overflow, 1e-12);
    for (std::size_t i = 0; i < in.n.size(); ++i) EXPECT_NEAR(mr.p_volunteer[i], ex.p_volunteer[i], 1e-12);
  }
}
