#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/risk_measures.hpp"

using namespace riskshare;

namespace {

// Quantile of the log-normal mixture by plain bisection on the series-based CDF.
double oracle_mixture_quantile(const IncidentMix& mix, const SeverityModel& sev, double level) {
  auto cdf = [&](double y) {
    double f = 0;
    for (std::size_t k = 0; k < sev.size(); ++k) {
      f += mix[k] * oracle::normal_cdf((std::log(y) - sev[k].mu) / sev[k].sigma);
    }
    return f;
  };
  double lo = 1e-9, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (cdf(mid) >= level ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

TEST(ValueAtRisk, PointMass) {
  auto cdf = [](double y) { return y >= 3.25 ? 1.0 : 0.0; };
  EXPECT_NEAR(value_at_risk(cdf, 0.5), 3.25, kVarTolerance);
  EXPECT_GE(value_at_risk(cdf, 0.5), 3.25);
}

TEST(ValueAtRisk, JumpOverLevelLandsOnAtom) {
  auto cdf = [](double y) { return y < 0 ? 0.0 : (y < 2.0 ? 0.3 : (y < 5.0 ? 0.95 : 1.0)); };
  const double v = value_at_risk(cdf, 0.9);
  EXPECT_GE(v, 2.0);
  EXPECT_LT(v - kVarTolerance, 2.0);
}

TEST(ValueAtRisk, FlatStretchReturnsLeftEnd) {
  // F = 0.9 on [1.5, 4): the 0.9 quantile is 1.5.
  auto cdf = [](double y) { return y < 0 ? 0.0 : (y < 1.5 ? 0.6 * y : (y < 4.0 ? 0.9 : 1.0)); };
  const double v = value_at_risk(cdf, 0.9);
  EXPECT_NEAR(v, 1.5, kVarTolerance);
  EXPECT_GE(cdf(v), 0.9);
  EXPECT_LT(cdf(v - kVarTolerance), 0.9);
}

TEST(ValueAtRisk, NegativeSupport) {
  auto cdf = [](double y) { return y >= -7.0 ? 1.0 : 0.0; };
  EXPECT_NEAR(value_at_risk(cdf, 0.5), -7.0, kVarTolerance);
}

TEST(ValueAtRisk, ErrorsAreDistinct) {
  auto cdf = [](double y) { return y < 0 ? 0.0 : 0.5; };
  EXPECT_THROW(value_at_risk(cdf, 1.0), InvalidInput);
  EXPECT_THROW(value_at_risk(cdf, 0.0), InvalidInput);
  EXPECT_THROW(value_at_risk(cdf, 0.9), UnreachableLevel);
  try {
    value_at_risk(cdf, 0.9);
  } catch (const InvalidInput&) {
    FAIL() << "unreachable level reported as invalid input";
  } catch (const NumericFailure&) {
  }
}

TEST(ValueAtRisk, GroundUpMatchesReportedBuyerRisk) {
  const auto sev = SeverityModel::cyber_reference();
  EXPECT_NEAR(ground_up_var(fixtures::org(1), sev, 0.9), 13.6984, 0.002 * 13.6984);
  EXPECT_NEAR(ground_up_var(fixtures::org(3), sev, 0.9), 8.7049, 0.002 * 8.7049);
}

TEST(ValueAtRisk, GroundUpMatchesIndependentQuantile) {
  const auto sev = SeverityModel::cyber_reference();
  for (int i = 1; i <= 5; ++i) {
    for (double level : {0.5, 0.9, 0.95, 0.99}) {
      const double want = oracle_mixture_quantile(fixtures::org(i), sev, level);
      EXPECT_NEAR(ground_up_var(fixtures::org(i), sev, level), want, 2 * kVarTolerance + 1e-9 * want);
    }
  }
}

TEST(ValueAtRisk, MonotoneInLevel) {
  const auto sev = SeverityModel::cyber_reference();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> p(4);
    double s = 0;
    for (double& v : p) s += (v = e(rng));
    for (double& v : p) v /= s;
    const IncidentMix mix(p);
    const ContractDesign c({std::uint8_t(rng() % 2), std::uint8_t(rng() % 2), std::uint8_t(rng() % 2),
                            std::uint8_t(rng() % 2)},
                           {e(rng), e(rng), e(rng), e(rng)});
    double g1 = u(rng), g2 = u(rng);
    if (g1 > g2) std::swap(g1, g2);
    const Party party = i % 2 ? Party::buyer : Party::seller;
    EXPECT_LE(party_var(party, c, mix, sev, g1), party_var(party, c, mix, sev, g2) + kVarTolerance);
  }
}

TEST(ValueAtRisk, TranslationInvariance) {
  const auto sev = SeverityModel::cyber_reference();
  const auto mix = fixtures::org(2);
  auto base = [&](double y) { return ground_up_cdf(mix, sev, y); };
  for (double shift : {0.0, 0.37, 2.5, 19.0}) {
    auto shifted = [&](double y) { return base(y - shift); };
    for (double level : {0.3, 0.9, 0.95}) {
      EXPECT_NEAR(value_at_risk(shifted, level), value_at_risk(base, level) + shift, 2 * kVarTolerance);
    }
  }
}

TEST(Objective, ZeroCessionLeavesBuyerRisk) {
  const auto sev = SeverityModel::cyber_reference();
  const auto mix = fixtures::org(1);
  const double v = objective(ContractDesign::zero_cession(4), mix, sev, {});
  EXPECT_NEAR(v, 13.6984, 0.002 * 13.6984);
  EXPECT_NEAR(v, ground_up_var(mix, sev, 0.9), 1e-12);
}

TEST(Objective, FullCessionMovesSellerToGroundUpQuantile) {
  const auto sev = SeverityModel::cyber_reference();
  const auto mix = fixtures::org(1);
  const double want = oracle_mixture_quantile(mix, sev, 0.95);
  EXPECT_NEAR(objective(ContractDesign::full_cession(4), mix, sev, {}), want, 2 * kVarTolerance + 1e-9 * want);
}

// Frozen against an independent scipy evaluation of the same loss model.
TEST(Objective, FrozenValues) {
  const auto sev = SeverityModel::cyber_reference();
  const auto mix = fixtures::org(1);
  const ContractDesign pv_deductible({1, 0, 0, 0}, {0, 0, 0, 0});
  EXPECT_NEAR(objective(pv_deductible, mix, sev, {}), 11.3333, 5e-4);
  const auto c = fixtures::reported_contract();
  EXPECT_NEAR(party_var(Party::seller, c, mix, sev, 0.95), 32.5576, 5e-4);
  EXPECT_NEAR(party_var(Party::buyer, c, mix, sev, 0.90), 0.3795, 5e-4);
}

TEST(PremiumRange, ZeroCessionIsDegenerateAtZero) {
  const auto sev = SeverityModel::cyber_reference();
  const auto r = premium_range(ContractDesign::zero_cession(4), fixtures::org(1), sev, {});
  EXPECT_EQ(r.lo, 0.0);
  EXPECT_EQ(r.hi, 0.0);
  EXPECT_FALSE(r.empty());
}

TEST(PremiumRange, EmptyIntervalIsFlaggedNotThrown) {
  const auto sev = SeverityModel::cyber_reference();
  const auto r = premium_range(fixtures::reported_contract(), fixtures::org(1), sev, {});
  EXPECT_TRUE(r.empty());
}

TEST(QuoteReport, Identities) {
  const auto sev = SeverityModel::cyber_reference();
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> e(3.0);
  for (int i = 1; i <= 5; ++i) {
    const ContractDesign c({std::uint8_t(rng() % 2), std::uint8_t(rng() % 2), std::uint8_t(rng() % 2),
                            std::uint8_t(rng() % 2)},
                           {e(rng), e(rng), e(rng), e(rng)});
    const auto q = quote_report(c, fixtures::org(i), sev, {});
    EXPECT_EQ(q.objective, q.buyer_var_with_ins + q.seller_var_with_ins);
    EXPECT_EQ(q.buyer_risk_reduction(), q.premium.hi);
    EXPECT_EQ(q.seller_var_with_ins, q.premium.lo);
    EXPECT_EQ(q.aggregate_risk_reduction(), q.buyer_var_no_ins - q.objective);
    EXPECT_GE(q.buyer_var_with_ins, 0.0);
    EXPECT_GE(q.seller_var_with_ins, 0.0);
  }
}

TEST(QuoteReport, ZeroCessionHasNoReductions) {
  const auto q = quote_report(ContractDesign::zero_cession(4), fixtures::org(1), SeverityModel::cyber_reference(), {});
  EXPECT_EQ(q.buyer_risk_reduction(), 0.0);
  EXPECT_EQ(q.seller_risk_increase(), 0.0);
  EXPECT_EQ(q.aggregate_risk_reduction(), 0.0);
}

TEST(RiskPreferences, Validate) {
  EXPECT_THROW((RiskPreferences{1.0, 0.9}.validate()), InvalidInput);
  EXPECT_THROW((RiskPreferences{0.95, 0.0}.validate()), InvalidInput);
  EXPECT_NO_THROW((RiskPreferences{0.5, 0.5}.validate()));
}
