#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "adtrade/constrained.hpp"
#include "adtrade/errors.hpp"
#include "oracles.hpp"

using namespace adtrade;

namespace {

AdCapProblem uniform_cap(double cap) {
  AdCapProblem p;
  AdCapTerm t;
  t.weights = {0, 1, 0};
  t.bidders.push_back({ValueDistribution::uniform(0, 1), WeightSpec::constant(1.0), 0.0});
  p.terms.push_back(t);
  p.cap = cap;
  return p;
}

FrontierPoint fp(double x, double y) {
  FrontierPoint p;
  p.metrics.impressions = x;
  p.metrics.revenue = y;
  return p;
}

const Axis kX{Metric::Impressions, Sense::Minimize};
const Axis kY{Metric::Revenue, Sense::Maximize};
const Axis kXup{Metric::Impressions, Sense::Maximize};

DiscreteBidder dbid(std::vector<double> t, std::vector<double> p, double w = 1.0) {
  return {std::move(t), std::move(p), w};
}

}  // namespace

TEST(AdCap, UniformClosedForm) {
  EstimatorConfig est;
  est.samples = 200000;
  auto s = solve_ad_cap(uniform_cap(0.5), 1e-9, est);
  EXPECT_NEAR(s.lambda, 0.5, 0.005);
  EXPECT_NEAR(s.achieved, 0.5, 1e-9);
  EXPECT_NEAR(s.terms[0].score_reserve, s.lambda, 1e-15);
  EXPECT_LE(std::abs(s.lambda * (0.5 - s.achieved)), 1e-9);
}

TEST(AdCap, ExpectedImpressions) {
  EstimatorConfig est;
  est.samples = 100000;
  auto p = uniform_cap(0.5);
  EXPECT_NEAR(expected_impressions(p, 0.0, est), 1.0, 1e-9);
  EXPECT_EQ(expected_impressions(p, 1e6, est), 0.0);
  const double e = expected_impressions(p, 0.25, est);
  EXPECT_NEAR(e, 0.75, 3 * std::sqrt(0.75 * 0.25 / est.samples));
  double prev = 2.0;
  for (int k = 0; k <= 20; ++k) {
    const double v = expected_impressions(p, 0.06 * k, est);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(AdCap, SlackCapGivesZeroLambda) {
  EstimatorConfig est;
  est.samples = 5000;
  auto s = solve_ad_cap(uniform_cap(1.0), 1e-9, est);
  EXPECT_EQ(s.lambda, 0.0);
  EXPECT_NEAR(s.achieved, 1.0, 1e-12);
}

TEST(AdCap, DegenerateCap) {
  EXPECT_THROW(solve_ad_cap(uniform_cap(0.0), 1e-9, {}), DomainError);
  EXPECT_THROW(solve_ad_cap(uniform_cap(-0.2), 1e-9, {}), DomainError);
}

TEST(AdCap, ProbabilitiesMustSumToOne) {
  auto p = uniform_cap(0.5);
  p.terms[0].probability = 0.7;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(AdCap, DiscreteMatchesPolicyEnumeration) {
  AdCapProblem p;
  AdCapTerm a, b;
  a.probability = 0.6;
  a.slot_effect = 1.0;
  a.weights = {0.5, 1, 0.1};
  a.discrete = {dbid({1, 2, 4}, {0.3, 0.4, 0.3}), dbid({0.5, 3}, {0.5, 0.5}, 0.8)};
  b.probability = 0.4;
  b.slot_effect = 0.7;
  b.weights = {0, 1, 0};
  b.discrete = {dbid({1, 5}, {0.8, 0.2}, 1.2), dbid({2, 3}, {0.5, 0.5})};
  p.terms = {a, b};
  for (double cap : {0.2, 0.45, 0.7, 0.95}) {
    p.cap = cap;
    auto s = solve_ad_cap(p, 1e-12, {});
    const double want = oracle::adcap_best_mixture(p);
    EXPECT_NEAR(s.objective, want, 1e-9 * std::max(1.0, std::abs(want))) << "cap " << cap;
    EXPECT_LE(std::abs(s.lambda * (cap - s.achieved)), 1e-9);
    EXPECT_LE(s.achieved, cap + 1e-12);
  }
}

TEST(Frontier, ParetoExamples) {
  auto one = pareto_filter({fp(1, 1)}, kX, kY);
  ASSERT_EQ(one.size(), 1u);
  auto two = pareto_filter({fp(1, 2), fp(2, 1)}, kX, kY);
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].metrics.revenue, 2);
  auto dup = pareto_filter({fp(1, 2), fp(1, 2), fp(2, 3)}, kX, kY);
  EXPECT_EQ(dup.size(), 3u);
}

TEST(Frontier, ParetoMatchesQuadraticOracle) {
  std::mt19937_64 g(21);
  std::uniform_int_distribution<int> U(0, 12);
  for (int it = 0; it < 200; ++it) {
    std::vector<FrontierPoint> pts;
    const int n = 1 + it % 25;
    for (int i = 0; i < n; ++i) pts.push_back(fp(U(g) * 0.25, U(g) * 0.5));
    for (const auto& xa : {kX, kXup}) {
      auto got = pareto_filter(pts, xa, kY);
      auto want = oracle::pareto_indices(pts, xa, kY);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t q = 0; q < got.size(); ++q) {
        EXPECT_EQ(got[q].metrics.impressions, pts[want[q]].metrics.impressions);
        EXPECT_EQ(got[q].metrics.revenue, pts[want[q]].metrics.revenue);
      }
    }
  }
}

TEST(Frontier, BuildFrontierFiltersGrid) {
  Scenario sc;
  for (int i = 0; i < 4; ++i)
    sc.bidders.push_back({ValueDistribution::uniform(0, 1), WeightSpec::constant(1.0), 0.0});
  sc.slots = SlotLayout({1, 0.5});
  std::vector<GridRule> grid;
  for (int k = 0; k < 8; ++k) {
    RuleParams rp;
    rp.rule = "standard";
    rp.r = 0.1 * k;
    grid.push_back({rp, RankingRule::standard(rp.r)});
  }
  EstimatorConfig est;
  est.samples = 4000;
  auto all = evaluate_grid(sc, grid, Pricing::Truthful, est);
  auto front = build_frontier(sc, grid, Pricing::Truthful, est);
  auto want = oracle::pareto_indices(all, kX, kY);
  ASSERT_EQ(front.size(), want.size());
  for (std::size_t q = 0; q < front.size(); ++q)
    EXPECT_EQ(front[q].params.r, all[want[q]].params.r);
  EXPECT_THROW(build_frontier(sc, {}, Pricing::Truthful, est), ConfigError);
}

TEST(Concavity, Examples) {
  EXPECT_TRUE(concavity_check({fp(0, 0), fp(1, 1), fp(2, 2)}, kXup, kY, 3, 0).ok);
  EXPECT_TRUE(concavity_check({fp(0, 0), fp(1, 2), fp(2, 3)}, kXup, kY, 3, 0).ok);
  auto v = concavity_check({fp(0, 0), fp(1, 1), fp(2, 3)}, kXup, kY, 3, 0);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.index, 1u);
  EXPECT_NEAR(v.deficit, 0.5, 1e-12);
}

TEST(Concavity, SlackAbsorbsNoise) {
  auto pts = std::vector<FrontierPoint>{fp(0, 0), fp(1, 1), fp(2, 3)};
  pts[1].stderr_.revenue = 0.2;
  EXPECT_TRUE(concavity_check(pts, kXup, kY, 3, 0).ok);
}

TEST(Discrete, VirtualValues) {
  auto b = dbid({1, 2, 4}, {0.5, 0.25, 0.25});
  auto phi = discrete_virtual_values(b);
  EXPECT_NEAR(phi[0], 1 - 1 * 0.5 / 0.5, 1e-12);
  EXPECT_NEAR(phi[1], 2 - 2 * 0.25 / 0.25, 1e-12);
  EXPECT_EQ(phi[2], 4);
  EXPECT_TRUE(is_regular(b));
  EXPECT_FALSE(is_regular(dbid({1, 2, 3}, {0.45, 0.1, 0.45})));
  EXPECT_THROW(dbid({2, 1}, {0.5, 0.5}).validate(), ConfigError);
}

TEST(Discrete, PsiMetricsSingleBidder) {
  // One bidder, types {1, 2} w.p. 1/2: welfare ranking shows every type and
  // the threshold price is the lowest type.
  DiscreteInstance inst{{dbid({1, 2}, {0.5, 0.5})}, SlotLayout({1})};
  auto m = discrete_psi_metrics(inst, {0, 1, 0});
  EXPECT_NEAR(m.welfare, 1.5, 1e-12);
  EXPECT_NEAR(m.revenue, 1.0, 1e-12);
  EXPECT_NEAR(m.impressions, 1.0, 1e-12);
  // Revenue ranking: phi = (0, 2); a zero score is still seated, price 1.
  auto r = discrete_psi_metrics(inst, {1, 0, 0});
  EXPECT_NEAR(r.revenue, 1.0, 1e-12);
  EXPECT_NEAR(r.impressions, 1.0, 1e-12);
}

TEST(Duality, NoConstraints) {
  DiscreteInstance inst{{dbid({1, 2, 3}, {0.3, 0.3, 0.4}), dbid({1, 4}, {0.5, 0.5}, 0.9)},
                        SlotLayout({1, 0.4})};
  auto r = duality_gap_check(inst, {1, 0.5, 0}, {});
  EXPECT_EQ(r.status, DualityStatus::Ok);
  EXPECT_NEAR(r.gap, 0.0, 1e-9);
  EXPECT_NEAR(r.primal, discrete_psi_value(inst, {1, 0.5, 0}), 1e-9);
}

TEST(Duality, SlackDuplicateConstraint) {
  DiscreteInstance inst{{dbid({1, 2, 3}, {0.3, 0.3, 0.4}), dbid({1, 4}, {0.5, 0.5})},
                        SlotLayout({1})};
  const ObjectiveWeights w{0, 1, 0};
  const double opt = discrete_psi_value(inst, {0, 1, 0});
  LinearConstraint c{0, 1, 0, 0.5 * opt, ConstraintSense::AtLeast};
  auto r = duality_gap_check(inst, w, {c});
  EXPECT_NEAR(r.gap, 0.0, 1e-9);
  ASSERT_EQ(r.lambda.size(), 1u);
  EXPECT_NEAR(r.lambda[0], 0.0, 1e-9);
}

TEST(Duality, BindingWelfareFloor) {
  DiscreteInstance inst{{dbid({1, 2, 3, 5}, {0.25, 0.25, 0.25, 0.25}),
                         dbid({0.5, 1.5, 2.5, 4}, {0.4, 0.3, 0.2, 0.1}, 1.3)},
                        SlotLayout({1})};
  const ObjectiveWeights w{1, 0, 0};
  const double rev_opt_welfare = discrete_psi_metrics(inst, {1, 0, 0}).welfare;
  const double max_welfare = discrete_psi_metrics(inst, {0, 1, 0}).welfare;
  LinearConstraint c{0, 1, 0, 0.5 * (rev_opt_welfare + max_welfare), ConstraintSense::AtLeast};
  auto r = duality_gap_check(inst, w, {c});
  ASSERT_EQ(r.status, DualityStatus::Ok);
  EXPECT_GE(r.dual, r.primal - 1e-9);
  EXPECT_LE(r.gap, 1e-6 * r.primal);
  EXPECT_GT(r.lambda[0], 0.0);
  EXPECT_TRUE(r.strictly_feasible);
}

TEST(Duality, Infeasible) {
  DiscreteInstance inst{{dbid({1, 2}, {0.5, 0.5})}, SlotLayout({1})};
  LinearConstraint c{0, 1, 0, 100, ConstraintSense::AtLeast};
  auto r = duality_gap_check(inst, {0, 1, 0}, {c});
  EXPECT_EQ(r.status, DualityStatus::Infeasible);
}

TEST(Constraint, Validate) {
  EXPECT_THROW((LinearConstraint{0, 0, 0, 1}.validate()), DomainError);
}
