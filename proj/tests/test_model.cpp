#include <gtest/gtest.h>

#include <random>

#include "edgemarket/model.hpp"
#include "oracles.hpp"

using namespace edgemarket::model;

namespace {

BuyerProfile buyer(double f, double g, double e, double gain) { return {f, g, e, FixedGain{gain}}; }

ValuationContext context(double w1, double w2, double seller_rate = 2.5e9) {
  return {{1.5e6, 6e6, w1, w2, 1.0}, seller_rate};
}

LongTermContract contract(int n, double p, double q, double qt = 0.0) { return {0, n, p, q, qt}; }

}  // namespace

TEST(UnitValuation, MatchesScalarEvaluation) {
  const double v = unit_valuation(buyer(2.5e6, 0.5, 0.5, 250), 250, context(1, 1));
  EXPECT_NEAR(v, 0.8457, 1e-3);
  EXPECT_NEAR(v, oracle::valuation(1.5e6, 6e6, 2.5e6, 2.5e9, 0.5, 0.5, 250, 1, 1), 1e-12);
}

TEST(UnitValuation, ZeroWeightsGiveZero) {
  EXPECT_EQ(unit_valuation(buyer(3e6, 0.52, 0.47, 123), 123, context(0, 0)), 0.0);
}

TEST(UnitValuation, NoSpeedupIsMinusTransmissionTime) {
  const auto ctx = context(1, 0, 2.5e6);
  const double v = unit_valuation(buyer(2.5e6, 0.5, 0.5, 250), 250, ctx);
  EXPECT_LT(v, 0.0);
  EXPECT_NEAR(v, -1.5e6 / (6e6 * std::log2(1 + 0.5 * 250)), 1e-12);
}

TEST(UnitValuation, NondecreasingInGain) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto b = buyer(1e6 + 2e6 * u(rng), 0.3 + 0.5 * u(rng), 0.3 + 0.5 * u(rng), 1);
    const auto ctx = context(3 * u(rng), 3 * u(rng));
    double prev = unit_valuation(b, 1.0, ctx);
    for (double gain = 2.0; gain < 1000; gain *= 1.7) {
      const double v = unit_valuation(b, gain, ctx);
      EXPECT_GE(v, prev - 1e-12);
      prev = v;
    }
  }
}

TEST(UnitValuation, RejectsNonPositiveGain) {
  EXPECT_THROW(unit_valuation(buyer(2.5e6, 0.5, 0.5, 1), 0.0, context(1, 1)), std::domain_error);
}

TEST(SellerUnitCost, EnergyPlusHardware) {
  const SellerProfile s{2.5e9, 0.7, 600, 0.01, 2400};
  EXPECT_NEAR(seller_unit_cost(s, {1.5e6, 6e6, 1, 1, 1}), 0.01042, 1e-5);
  EXPECT_EQ(seller_unit_cost({2.5e9, 0.7, 600, 0.0, 0}, {1.5e6, 6e6, 1, 1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(seller_unit_cost({2.5e9, 0.7, 600, 0.3, 0}, {1.5e6, 6e6, 1, 1, 0}), 0.3);
}

TEST(FbUtility, BothBranches) {
  EXPECT_DOUBLE_EQ(fb_utility(contract(5, 1, 0.5), 7, 2), 5.0);
  EXPECT_DOUBLE_EQ(fb_utility(contract(5, 1, 0.5), 3, 2), 2.0);
  EXPECT_DOUBLE_EQ(fb_utility(contract(0, 1, 0.5), 4, 2), 0.0);
}

TEST(FbUtility, ContinuousAtQuantity) {
  for (int n = 0; n < 8; ++n) {
    const auto c = contract(n, 1.3, 0.7);
    EXPECT_DOUBLE_EQ(fb_utility(c, n, 2.9), n * (2.9 - 1.3));
  }
}

TEST(FbSumUtility, SingleBuyerWithoutVolunteers) {
  const std::vector<FbSettlement> s{{contract(5, 1, 0.5, 0.5), 3, 2, 0}};
  EXPECT_DOUBLE_EQ(fb_sum_utility(s, 0.5, 10), fb_utility(s[0].contract, 3, 2));
}

TEST(FbSumUtility, VolunteerTermsByHand) {
  // committed 3 over capacity 2: one volunteered task
  const std::vector<FbSettlement> s{{contract(5, 1, 0.5, 0.5), 3, 2, 1}};
  EXPECT_DOUBLE_EQ(fb_sum_utility(s, 0.5, 2), 3.5);
}

TEST(FbSumUtility, AdditiveWithoutOverflow) {
  const std::vector<FbSettlement> s{{contract(5, 1, 0.5), 3, 2, 0}, {contract(4, 1, 0.5), 6, 2.5, 0}};
  EXPECT_DOUBLE_EQ(fb_sum_utility(s, 0.5, 100), fb_utility(s[0].contract, 3, 2) + fb_utility(s[1].contract, 6, 2.5));
}

TEST(FbSumUtility, RejectsInconsistentVolunteers) {
  const std::vector<FbSettlement> s{{contract(5, 1, 0.5, 0.5), 3, 2, 0}};
  EXPECT_THROW(fb_sum_utility(s, 0.5, 2), std::invalid_argument);
}

TEST(SellerFuturesUtility, DirectEvaluation) {
  const std::vector<FbSettlement> a{{contract(5, 1, 0.3, 0.5), 7, 2, 0}};
  EXPECT_DOUBLE_EQ(seller_futures_utility(a, 0, 0.4), 3.0);
  EXPECT_NEAR(seller_futures_utility(a, 1, 0.4), 1.6, 1e-12);
  const std::vector<FbSettlement> b{{contract(5, 1, 0.3, 0.5), 5, 2, 0}};
  EXPECT_DOUBLE_EQ(seller_futures_utility(b, 0, 0.4), 0.0);
}

TEST(SellerFuturesUtility, LinearInVolunteers) {
  const std::vector<FbSettlement> a{{contract(6, 2, 0.7, 1.1), 8, 3, 0}, {contract(6, 2, 0.7, 1.1), 2, 3, 0}};
  const double slope = -(1.1 + (2 - 0.25) + 0.7);
  for (int v = 0; v < 5; ++v)
    EXPECT_NEAR(seller_futures_utility(a, v, 0.25), seller_futures_utility(a, 0, 0.25) + v * slope, 1e-12);
}

TEST(SellerFuturesUtility, PriceIsATransfer) {
  // demand above the contract: buyer and seller shares sum to n * (v - c)
  for (double p : {0.5, 1.0, 2.5, 4.0}) {
    const std::vector<FbSettlement> a{{contract(5, p, 0.3), 9, 3.2, 0}};
    EXPECT_NEAR(fb_utility(a[0].contract, 9, 3.2) + seller_futures_utility(a, 0, 0.4), 5 * (3.2 - 0.4), 1e-12);
  }
}

TEST(SpotUtilities, Sums) {
  const std::vector<TemporaryContract> c{{1, 3, 2}};
  const std::vector<double> v{3};
  const auto u = spot_utilities(c, v, 1);
  EXPECT_DOUBLE_EQ(u.buyers_total, 3);
  EXPECT_DOUBLE_EQ(u.seller_total, 3);
  const auto e = spot_utilities({}, {}, 1);
  EXPECT_EQ(e.buyers_total, 0);
  EXPECT_EQ(e.seller_total, 0);
  const std::vector<TemporaryContract> z{{1, 4, 2.5}, {2, 2, 2.5}};
  const std::vector<double> vz{2.5, 2.5};
  EXPECT_EQ(spot_utilities(z, vz, 1).buyers_total, 0.0);
}

TEST(Validation, RejectsBadProfiles) {
  EXPECT_THROW(validate(BuyerProfile{0.0, 1, 1, FixedGain{1}}), std::invalid_argument);
  EXPECT_THROW(validate(BuyerProfile{1, 1, 1, UniformGain{5, 2}}), std::invalid_argument);
  EXPECT_THROW(validate(SellerProfile{1, 1, -1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(validate(TaskConfig{0, 1, 1, 1, 1}), std::invalid_argument);
}
