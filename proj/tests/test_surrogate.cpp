#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "riskshare/errors.hpp"
#include "riskshare/surrogate.hpp"

using namespace riskshare;

namespace {

const SeverityModel& sev() {
  static const SeverityModel s = SeverityModel::cyber_reference();
  return s;
}

SurrogateSample sample(std::vector<double> p, std::vector<std::uint8_t> theta, std::vector<double> d) {
  return {IncidentMix(std::move(p)), ContractDesign(std::move(theta), std::move(d)), 1.0, 0};
}

std::vector<double> random_mix(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(k);
  double s = 0;
  for (auto& v : p) s += (v = e(rng));
  for (auto& v : p) v /= s;
  return p;
}

// Brute-force k-NN: vote per coordinate, nearest breaks ties, d averaged over
// neighbours that share the vote (all neighbours if none do).
ContractDesign knn_oracle(const std::vector<SurrogateSample>& train, const IncidentMix& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < train.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (train[i].p[j] - q[j]) * (train[i].p[j] - q[j]);
    dist.emplace_back(s, i);
  }
  std::sort(dist.begin(), dist.end());
  dist.resize(k);
  const std::size_t dims = q.size();
  std::vector<std::uint8_t> theta(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    std::size_t ones = 0;
    for (auto [_, i] : dist) ones += train[i].contract.theta()[j];
    theta[j] = 2 * ones == k ? train[dist[0].second].contract.theta()[j] : (2 * ones > k);
  }
  std::vector<double> d(dims, 0.0);
  std::size_t used = 0;
  for (auto [_, i] : dist) {
    const auto t = train[i].contract.theta();
    if (!std::equal(t.begin(), t.end(), theta.begin())) continue;
    for (std::size_t j = 0; j < dims; ++j) d[j] += train[i].contract.threshold(j);
    ++used;
  }
  if (used == 0) {
    for (auto [_, i] : dist)
      for (std::size_t j = 0; j < dims; ++j) d[j] += train[i].contract.threshold(j);
    used = k;
  }
  for (auto& v : d) v /= static_cast<double>(used);
  return ContractDesign(theta, d);
}

class ZeroLimit : public ContractPredictor {
 public:
  SurrogatePrediction predict(const IncidentMix& p) const override {
    SurrogatePrediction r{ContractDesign::zero_cession(p.size())};
    return r;
  }
};

}  // namespace

TEST(Surrogate, SingleSampleMemorized) {
  const auto s = sample({0.1, 0.2, 0.3, 0.4}, {1, 0, 1, 0}, {0.5, 0.01, 2.0, 0.0});
  const auto m = train_surrogate({s});
  EXPECT_EQ(m.neighbours(), 1u);
  const auto r = m.predict(s.p);
  EXPECT_EQ(r.contract, s.contract);
  EXPECT_TRUE(r.exact_match);
  EXPECT_FALSE(r.flagged());
}

TEST(Surrogate, ConstantThetaUsesOnePattern) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SurrogateSample> train;
  for (int i = 0; i < 40; ++i) train.push_back(sample(random_mix(rng, 4), {0, 1, 1, 0}, {u(rng), u(rng), u(rng), u(rng)}));
  const SurrogateModel m(train);
  for (int i = 0; i < 50; ++i) {
    const auto& a = train[rng() % 40].p;
    const auto& b = train[rng() % 40].p;
    std::vector<double> q(4);
    for (std::size_t j = 0; j < 4; ++j) q[j] = 0.5 * (a[j] + b[j]);
    const auto r = m.predict(IncidentMix(q));
    EXPECT_EQ(r.contract.theta_code(), train[0].contract.theta_code());
    EXPECT_EQ(r.neighbours.size(), 5u);
    EXPECT_FALSE(r.mixed_neighbours);
  }
}

TEST(Surrogate, MatchesBruteForceKnn) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SurrogateSample> train;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::uint8_t> th(4);
    for (auto& t : th) t = rng() % 2;
    train.push_back(sample(random_mix(rng, 4), th, {u(rng), u(rng), u(rng), u(rng)}));
  }
  for (std::size_t k : {1u, 4u, 5u}) {
    const SurrogateModel m(train, k);
    for (int i = 0; i < 100; ++i) {
      // Convex combinations stay inside the bounding box.
      const auto w = random_mix(rng, 3);
      std::vector<double> q(4, 0.0);
      for (std::size_t c = 0; c < 3; ++c) {
        const auto& row = train[rng() % 60].p;
        for (std::size_t j = 0; j < 4; ++j) q[j] += w[c] * row[j];
      }
      const IncidentMix mix(q);
      const auto r = m.predict(mix);
      ASSERT_FALSE(r.extrapolated);
      if (r.unseen_pattern) continue;
      const auto want = knn_oracle(train, mix, k);
      EXPECT_EQ(r.contract.theta_code(), want.theta_code());
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.contract.threshold(j), want.threshold(j), 1e-15);
    }
  }
}

TEST(Surrogate, OutsideBoxExtrapolatesFromNearest) {
  const std::vector<SurrogateSample> train = {
      sample({0.4, 0.3, 0.2, 0.1}, {1, 1, 0, 0}, {1, 1, 1, 1}),
      sample({0.3, 0.4, 0.2, 0.1}, {0, 0, 1, 1}, {2, 2, 2, 2}),
      sample({0.35, 0.35, 0.15, 0.15}, {1, 0, 1, 0}, {3, 3, 3, 3}),
  };
  const SurrogateModel m(train);
  const auto r = m.predict(IncidentMix({0.97, 0.01, 0.01, 0.01}));
  EXPECT_TRUE(r.extrapolated);
  EXPECT_TRUE(r.flagged());
  EXPECT_EQ(r.contract, train[0].contract);
}

TEST(Surrogate, UnseenPatternFallsBackToNearest) {
  const std::vector<SurrogateSample> train = {
      sample({0.5, 0.3, 0.2}, {1, 1, 0}, {1, 1, 1}),
      sample({0.3, 0.5, 0.2}, {1, 0, 1}, {2, 2, 2}),
      sample({0.3, 0.3, 0.4}, {0, 1, 1}, {3, 3, 3}),
  };
  const SurrogateModel m(train, 3);
  const auto r = m.predict(IncidentMix({0.36, 0.33, 0.31}));
  EXPECT_TRUE(r.unseen_pattern);
  EXPECT_FALSE(r.extrapolated);
  EXPECT_EQ(r.contract, train[2].contract);
}

TEST(Surrogate, MixedNeighboursAverageAll) {
  const std::vector<SurrogateSample> train = {
      sample({0.5, 0.3, 0.2}, {1, 1, 0}, {1, 1, 1}),
      sample({0.3, 0.5, 0.2}, {1, 0, 1}, {2, 2, 2}),
      sample({0.3, 0.3, 0.4}, {0, 1, 1}, {3, 3, 6}),
      sample({0.1, 0.1, 0.8}, {1, 1, 1}, {9, 9, 9}),
      sample({0.8, 0.1, 0.1}, {0, 0, 0}, {9, 9, 9}),
  };
  const SurrogateModel m(train, 3);
  const auto r = m.predict(IncidentMix({0.36, 0.35, 0.29}));
  EXPECT_TRUE(r.mixed_neighbours);
  EXPECT_FALSE(r.unseen_pattern);
  EXPECT_EQ(r.contract, ContractDesign({1, 1, 1}, {2.0, 2.0, 3.0}));
}

TEST(Surrogate, RejectsBadInput) {
  EXPECT_THROW(train_surrogate({}), InvalidInput);
  const SurrogateModel m({sample({0.5, 0.5}, {1, 0}, {1, 1})});
  EXPECT_THROW(m.predict(IncidentMix({0.2, 0.3, 0.5})), DimensionMismatch);
  EXPECT_THROW(train_surrogate({sample({0.5, 0.5}, {1, 0}, {1, 1}), sample({0.2, 0.3, 0.5}, {1, 0, 0}, {1, 1, 1})}),
               DimensionMismatch);
}

TEST(SimplexSweep, ValidDistinctDeterministic) {
  const auto a = simplex_sweep(4, 200, 7), b = simplex_sweep(4, 200, 7), c = simplex_sweep(4, 200, 8);
  ASSERT_EQ(a.size(), 200u);
  std::set<std::vector<double>> seen;
  std::vector<double> lo(4, 1.0), hi(4, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::vector<double> v(a[i].probs().begin(), a[i].probs().end());
    EXPECT_EQ(v, std::vector<double>(b[i].probs().begin(), b[i].probs().end()));
    seen.insert(v);
    for (std::size_t j = 0; j < 4; ++j) {
      lo[j] = std::min(lo[j], v[j]);
      hi[j] = std::max(hi[j], v[j]);
    }
  }
  EXPECT_EQ(seen.size(), 200u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_LT(lo[j], 0.1);
    EXPECT_GT(hi[j], 0.8);
  }
  bool differs = false;
  for (std::size_t i = 0; i < 200; ++i) differs = differs || !std::ranges::equal(a[i].probs(), c[i].probs());
  EXPECT_TRUE(differs);
}

TEST(BuildTrainingSet, SingleTrialIsThatTrialsSolution) {
  auto cfg = fixtures::coarse_config();
  cfg.seed = 5;
  const auto built = build_training_set({fixtures::org(2)}, sev(), {}, cfg, 1);
  ASSERT_EQ(built.samples.size(), 1u);
  const auto direct = run_multi_trial(fixtures::org(2), sev(), {}, cfg, 1);
  EXPECT_EQ(built.samples[0].contract, direct.best->best_z);
  EXPECT_EQ(built.samples[0].objective_star, objective(direct.best->best_z, fixtures::org(2), sev(), {}));
}

TEST(BuildTrainingSet, DuplicatesIdenticalAndFailuresSkipped) {
  auto cfg = fixtures::coarse_config();
  const auto built = build_training_set({fixtures::org(3), IncidentMix({0.5, 0.5}), fixtures::org(3)}, sev(), {},
                                        cfg, 3, {2, std::nullopt});
  ASSERT_EQ(built.samples.size(), 2u);
  ASSERT_EQ(built.failures.size(), 1u);
  EXPECT_EQ(built.failures[0].index, 1u);
  EXPECT_EQ(built.samples[0].contract, built.samples[1].contract);
  EXPECT_EQ(built.samples[0].objective_star, built.samples[1].objective_star);
}

TEST(Evaluate, MemorizingModelHasNoErrors) {
  const auto built = build_training_set(simplex_sweep(4, 12, 3), sev(), {}, fixtures::coarse_config(), 2);
  ASSERT_EQ(built.samples.size(), 12u);
  const auto m = train_surrogate(built.samples);
  const auto ev = evaluate(m, built.samples, sev(), {});
  EXPECT_EQ(ev.error_rate, 0.0);
  EXPECT_EQ(ev.violations, 0u);
  for (const auto& s : ev.samples) EXPECT_TRUE(s.prediction.exact_match);
}

TEST(Evaluate, ZeroCessionGapIsGroundUpVar) {
  const auto built = build_training_set({fixtures::org(1), fixtures::org(4)}, sev(), {}, fixtures::coarse_config(), 2);
  ASSERT_EQ(built.samples.size(), 2u);
  const auto ev = evaluate(ZeroLimit{}, built.samples, sev(), {});
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& s = built.samples[i];
    const double want = objective(s.contract, s.p, sev(), {}) - ground_up_var(s.p, sev(), 0.90);
    EXPECT_NEAR(ev.samples[i].gap, want, 2 * kVarTolerance);
    EXPECT_LT(ev.samples[i].gap, 0.0);
    EXPECT_TRUE(ev.samples[i].error);
  }
  EXPECT_EQ(ev.error_rate, 1.0);
  EXPECT_THROW(evaluate(ZeroLimit{}, {}, sev(), {}), InvalidInput);
}

TEST(Surrogate, PredictionIsFast) {
  std::mt19937_64 rng(9);
  std::vector<SurrogateSample> train;
  for (int i = 0; i < 2201; ++i) train.push_back(sample(random_mix(rng, 4), {1, 0, 0, 1}, {1, 2, 3, 4}));
  const SurrogateModel m(train);
  const auto q = fixtures::org(1);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) (void)m.predict(q);
  const auto per_call = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 100;
  EXPECT_LE(per_call, 10.0);
}
