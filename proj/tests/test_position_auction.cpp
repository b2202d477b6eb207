#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "adtrade/errors.hpp"
#include "adtrade/position_auction.hpp"

using namespace adtrade;

namespace {

std::vector<BidderProfile> truthful(std::vector<double> t, std::vector<double> w = {}) {
  std::vector<BidderProfile> v;
  for (std::size_t i = 0; i < t.size(); ++i) v.push_back({t[i], w.empty() ? 1.0 : w[i], t[i]});
  return v;
}

// Myerson price from the jumps of bidder i's received effect as a function of
// its own bid: locate each jump by scan + bisection on the allocation alone.
double threshold_oracle(const RankingRule& rule, std::vector<BidderProfile> bs,
                        const SlotLayout& slots, std::size_t i) {
  const double top = bs[i].bid;
  auto effect = [&](double b) {
    bs[i].bid = b;
    auto out = allocate(rule, bs, slots);
    return out.effects[i];
  };
  const int n = 4000;
  double payment = 0.0, prev_b = 0.0, prev_e = effect(0.0);
  for (int k = 1; k <= n; ++k) {
    const double b = top * k / n;
    const double e = effect(b);
    if (e != prev_e) {
      double lo = prev_b, hi = b;
      for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (lo + hi);
        (effect(m) == prev_e ? lo : hi) = m;
      }
      payment += hi * (e - prev_e);
      prev_e = e;
    }
    prev_b = b;
  }
  bs[i].bid = top;
  const double x = effect(top);
  return x > 0 ? payment / x : 0.0;
}

}  // namespace

TEST(Score, Examples) {
  auto a = score(RankingRule::standard(0.3), 0.5, 2);
  EXPECT_DOUBLE_EQ(a.score, 1.0);
  EXPECT_TRUE(a.eligible);
  auto b = score(RankingRule::subtractive(0.5), 0.4, 1);
  EXPECT_NEAR(b.score, -0.1, 1e-15);
  EXPECT_FALSE(b.eligible);
  PsiFunction p({1, 0, 0}, ValueDistribution::uniform(0, 1));
  auto c = score(RankingRule::optimal({p}), 0.75, 1);
  EXPECT_NEAR(c.score, 0.5, 1e-12);
  EXPECT_TRUE(c.eligible);
}

TEST(Score, TwoParamNeedsBothFilters) {
  auto r = RankingRule::two_param(0.5, 1.0);
  EXPECT_FALSE(score(r, 0.4, 10).eligible);  // below r
  EXPECT_FALSE(score(r, 1.2, 1).eligible);   // w(b-r) = 0.7 < rho
  EXPECT_TRUE(score(r, 1.6, 1).eligible);
  EXPECT_DOUBLE_EQ(r.floor(1.0), 1.5);
  EXPECT_DOUBLE_EQ(r.floor(10.0), 0.6);
}

TEST(Score, NegativeReserveRejected) {
  EXPECT_THROW(RankingRule::standard(-0.1), DomainError);
  EXPECT_THROW(RankingRule::impression_reserve(-1), DomainError);
}

TEST(Allocate, Examples) {
  auto bs = truthful({3, 2, 1});
  SlotLayout s({1, 0.5});
  auto a = allocate(RankingRule::standard(0), bs, s);
  EXPECT_EQ(a.assignment[0], 0u);
  EXPECT_EQ(a.assignment[1], 1u);
  EXPECT_FALSE(a.position[2].has_value());

  auto b = allocate(RankingRule::impression_reserve(2.5), bs, s);
  EXPECT_EQ(b.assignment[0], 0u);
  EXPECT_FALSE(b.assignment[1].has_value());
  EXPECT_EQ(b.allocated(), 1u);

  auto c = allocate(RankingRule::standard(0), truthful({2, 2}), s);
  EXPECT_EQ(c.assignment[0], 0u);
  EXPECT_EQ(c.assignment[1], 1u);
}

TEST(Slots, Validate) {
  EXPECT_THROW(SlotLayout(std::vector<double>{}).validate(), DomainError);
  EXPECT_THROW(SlotLayout({0.5, 1}).validate(), DomainError);
  EXPECT_THROW(SlotLayout({1, 0}).validate(), DomainError);
}

TEST(TruthfulPayments, Examples) {
  SlotLayout s({1, 0.5});
  auto p = truthful_payments(RankingRule::standard(0), truthful({3, 2, 1}), s);
  EXPECT_NEAR(p[0], 1.5, 1e-12);
  EXPECT_NEAR(p[1], 1.0, 1e-12);
  EXPECT_EQ(p[2], 0.0);
  auto q = truthful_payments(RankingRule::standard(0.4), truthful({1}), SlotLayout({1}));
  EXPECT_NEAR(q[0], 0.4, 1e-12);
}

TEST(TruthfulPayments, MatchThresholdOracle) {
  SlotLayout s({1, 0.5});
  std::vector<RankingRule> rules{RankingRule::standard(0), RankingRule::impression_reserve(1.2),
                                 RankingRule::subtractive(0.7), RankingRule::two_param(0.3, 0.9),
                                 RankingRule::standard(0.8)};
  auto bs = truthful({3, 2, 1}, {1, 1.3, 0.8});
  for (const auto& rule : rules) {
    auto p = truthful_payments(rule, bs, s);
    for (std::size_t i = 0; i < bs.size(); ++i)
      EXPECT_NEAR(p[i], threshold_oracle(rule, bs, s, i), 1e-9) << rule.name() << " bidder " << i;
  }
  auto ir = truthful_payments(RankingRule::impression_reserve(1.2), truthful({3, 2, 1}), s);
  EXPECT_NEAR(ir[1], 1.2, 1e-12);
  EXPECT_NEAR(ir[0], (0.5 * 2 + 0.5 * 1.2) / 1.0, 1e-12);
}

TEST(GspPayments, Examples) {
  SlotLayout s({1, 0.5});
  auto p = gsp_payments(RankingRule::standard(0), truthful({3, 2, 1}), s);
  EXPECT_NEAR(p[0], 2.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0, 1e-12);
  auto q = gsp_payments(RankingRule::subtractive(0.5), truthful({3, 2, 1}), s);
  EXPECT_NEAR(q[0], 0.5 + (2 - 0.5), 1e-12);
  EXPECT_NEAR(q[1], 1.0, 1e-12);
  auto r = gsp_payments(RankingRule::standard(0.4), truthful({1}), SlotLayout({1}));
  EXPECT_NEAR(r[0], 0.4, 1e-12);
}

TEST(GspPayments, LastSlotPaysFloor) {
  // Bidder 2 is ineligible (below r); the last winner pays the reserve.
  auto p = gsp_payments(RankingRule::standard(1.5), truthful({3, 2, 1}), SlotLayout({1, 0.5}));
  EXPECT_NEAR(p[1], 1.5, 1e-12);
  EXPECT_NEAR(p[0], 2.0, 1e-12);
}

TEST(LowestSne, Examples) {
  SlotLayout s({1, 0.5});
  auto types = truthful({3, 2, 1});
  auto rule = RankingRule::standard(0);
  auto b = lowest_sne_bids(rule, types, s);
  EXPECT_NEAR(b[0], 3, 1e-12);
  EXPECT_NEAR(b[1], 1.5, 1e-12);
  EXPECT_NEAR(b[2], 1, 1e-12);
  auto bs = types;
  for (std::size_t i = 0; i < 3; ++i) bs[i].bid = b[i];
  auto g = gsp_payments(rule, bs, s);
  EXPECT_NEAR(g[0], 1.5, 1e-12);
  EXPECT_NEAR(g[1], 1.0, 1e-12);
  EXPECT_TRUE(verify_sne(rule, bs, s, 1000, true).ok);

  auto one = lowest_sne_bids(rule, truthful({0.7}), SlotLayout({1}));
  EXPECT_EQ(one[0], 0.7);

  auto wt = truthful({3, 2, 1}, {2, 1, 1});
  auto wb = lowest_sne_bids(rule, wt, s);
  auto tp = truthful_payments(rule, wt, s);
  for (std::size_t i = 0; i < 3; ++i) wt[i].bid = wb[i];
  auto gp = gsp_payments(rule, wt, s);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(gp[i], tp[i], 1e-9);
}

TEST(LowestSne, NonlinearPsiUnsupported) {
  PsiFunction p({1, 0, 0}, ValueDistribution::beta(2, 3));
  EXPECT_THROW(lowest_sne_bids(RankingRule::optimal({p}), truthful({0.5, 0.3}), SlotLayout({1})),
               UnsupportedRule);
  auto lin = RankingRule::optimal({PsiFunction::linear(2, -1)});
  EXPECT_NO_THROW(lowest_sne_bids(lin, truthful({0.9, 0.8}), SlotLayout({1})));
}

TEST(VerifySne, EnvyExample) {
  SlotLayout s({1, 0.5});
  auto bs = truthful({3, 2, 1});
  bs[1].bid = 2.9;
  auto v = verify_sne(RankingRule::standard(0), bs, s, 1000, false);
  EXPECT_FALSE(v.ok);
  EXPECT_NE(v.violation.find("envy: bidder 0"), std::string::npos) << v.violation;
}

TEST(VerifySne, AllBelowReserve) {
  auto bs = truthful({0.2, 0.3});
  for (auto& b : bs) b.bid = 0;
  EXPECT_TRUE(verify_sne(RankingRule::standard(0.5), bs, SlotLayout({1}), 1000, true).ok);
}

TEST(VerifySne, ConservativeRejectsOverbid) {
  auto bs = truthful({1, 0.5});
  bs[0].bid = 1.2;
  EXPECT_FALSE(verify_sne(RankingRule::standard(0), bs, SlotLayout({1}), 100, true).ok);
}

namespace {

struct RandomInstance {
  std::vector<BidderProfile> types;
  SlotLayout slots;
};

RandomInstance random_instance(std::mt19937_64& g, bool unit_weights) {
  std::uniform_real_distribution<double> U(0, 1);
  std::uniform_int_distribution<int> nb(1, 6), ns(1, 4);
  RandomInstance r;
  const int n = nb(g), k = ns(g);
  for (int i = 0; i < n; ++i) {
    const double t = U(g);
    r.types.push_back({t, unit_weights ? 1.0 : 0.5 + U(g), t});
  }
  std::vector<double> s;
  double e = 1.0;
  for (int j = 0; j < k; ++j) {
    s.push_back(e);
    e *= 0.3 + 0.7 * U(g);
  }
  r.slots = SlotLayout(s);
  return r;
}

}  // namespace

TEST(Properties, AllocationMonotone) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> U(0, 1);
  for (int it = 0; it < 300; ++it) {
    auto inst = random_instance(g, false);
    std::vector<RankingRule> rules{RankingRule::standard(0.3 * U(g)),
                                   RankingRule::subtractive(0.3 * U(g)),
                                   RankingRule::impression_reserve(0.3 * U(g)),
                                   RankingRule::two_param(0.2 * U(g), 0.2 * U(g))};
    for (const auto& rule : rules) {
      auto bs = inst.types;
      const std::size_t i = g() % bs.size();
      bs[i].bid = U(g);
      const double e0 = allocate(rule, bs, inst.slots).effects[i];
      bs[i].bid += 0.5 * U(g);
      EXPECT_GE(allocate(rule, bs, inst.slots).effects[i], e0);
    }
  }
}

TEST(Properties, PaymentBracketing) {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(0, 1);
  for (int it = 0; it < 300; ++it) {
    auto inst = random_instance(g, false);
    std::vector<RankingRule> rules{RankingRule::standard(0.3 * U(g)),
                                   RankingRule::subtractive(0.3 * U(g)),
                                   RankingRule::impression_reserve(0.3 * U(g)),
                                   RankingRule::two_param(0.2 * U(g), 0.2 * U(g))};
    for (const auto& rule : rules) {
      auto out = allocate(rule, inst.types, inst.slots);
      auto tp = truthful_payments(rule, inst.types, inst.slots, out);
      auto gp = gsp_payments(rule, inst.types, inst.slots, out);
      for (std::size_t i = 0; i < inst.types.size(); ++i) {
        if (!out.position[i]) continue;
        const double fl = rule.floor(inst.types[i].weight, i);
        EXPECT_GE(tp[i], fl - 1e-12);
        EXPECT_LE(tp[i], inst.types[i].bid + 1e-12);
        EXPECT_GE(gp[i], fl - 1e-12);
        EXPECT_LE(gp[i], inst.types[i].bid + 1e-12);
        EXPECT_LE(tp[i], gp[i] + 1e-12);
      }
    }
  }
}

TEST(Properties, RevenueEquivalence) {
  // Rules whose eligibility floor is a common score level; Standard with a
  // positive reserve and unequal weights is covered by the acceptance run.
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (int it = 0; it < 200; ++it) {
    auto inst = random_instance(g, false);
    std::vector<RankingRule> rules{RankingRule::standard(0), RankingRule::subtractive(0.3 * U(g)),
                                   RankingRule::impression_reserve(0.3 * U(g)),
                                   RankingRule::two_param(0.2 * U(g), 0.2 * U(g))};
    for (const auto& rule : rules) {
      auto bids = lowest_sne_bids(rule, inst.types, inst.slots);
      auto tp = truthful_payments(rule, inst.types, inst.slots);
      auto bs = inst.types;
      for (std::size_t i = 0; i < bs.size(); ++i) bs[i].bid = bids[i];
      auto gp = gsp_payments(rule, bs, inst.slots);
      for (std::size_t i = 0; i < bs.size(); ++i) ASSERT_NEAR(gp[i], tp[i], 1e-9) << rule.name();
      if (it % 10 == 0) {
        auto v = verify_sne(rule, bs, inst.slots, 1000, true);
        EXPECT_TRUE(v.ok) << rule.name() << ": " << v.violation;
      }
    }
  }
}

TEST(Properties, StandardGspScoreOrdered) {
  std::mt19937_64 g(5);
  for (int it = 0; it < 200; ++it) {
    auto inst = random_instance(g, false);
    auto rule = RankingRule::standard(0);
    auto out = run_auction(rule, inst.types, inst.slots, PaymentRule::Gsp);
    for (std::size_t k = 0; k + 1 < inst.slots.size(); ++k) {
      if (!out.assignment[k + 1]) break;
      const std::size_t a = *out.assignment[k], b = *out.assignment[k + 1];
      EXPECT_GE(inst.types[a].weight * out.prices[a], inst.types[b].weight * out.prices[b] - 1e-12);
    }
  }
}

TEST(Properties, StandardReserveUnitWeights) {
  // With equal weights the per-click reserve is a common score floor.
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> U(0, 1);
  for (int it = 0; it < 200; ++it) {
    auto inst = random_instance(g, true);
    auto rule = RankingRule::standard(0.4 * U(g));
    auto bids = lowest_sne_bids(rule, inst.types, inst.slots);
    auto tp = truthful_payments(rule, inst.types, inst.slots);
    auto bs = inst.types;
    for (std::size_t i = 0; i < bs.size(); ++i) bs[i].bid = bids[i];
    auto gp = gsp_payments(rule, bs, inst.slots);
    for (std::size_t i = 0; i < bs.size(); ++i) ASSERT_NEAR(gp[i], tp[i], 1e-9);
  }
}
