#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "adtrade/metrics.hpp"
#include "adtrade/valuations.hpp"

namespace adtrade {

struct SlotLayout {
  std::vector<double> effects;  // s_1 >= s_2 >= ... > 0

  SlotLayout() = default;
  SlotLayout(std::vector<double> e) : effects(std::move(e)) {}  // NOLINT

  std::size_t size() const { return effects.size(); }
  double operator[](std::size_t k) const { return effects[k]; }
  // Throws DomainError unless non-empty, positive and non-increasing.
  void validate() const;
};

struct BidderProfile {
  double value = 0.0;   // t
  double weight = 1.0;  // w
  double bid = 0.0;     // b
};

namespace rules {
struct Standard {
  double r = 0.0;
};
struct Subtractive {
  double r = 0.0;
};
struct ImpressionReserve {
  double rho = 0.0;
};
struct TwoParam {
  double r = 0.0;
  double rho = 0.0;
};
// Ranks by w * psi_i(b). `psi` holds one shared function or one per bidder.
// A bidder is eligible when psi >= 0 and w * psi >= score_reserve.
struct OptimalPsi {
  std::vector<PsiFunction> psi;
  double score_reserve = 0.0;
};
}  // namespace rules

struct ScoreResult {
  double score;
  bool eligible;
};

class RankingRule {
 public:
  using Kind = std::variant<rules::Standard, rules::Subtractive, rules::ImpressionReserve,
                            rules::TwoParam, rules::OptimalPsi>;

  RankingRule(Kind k);  // NOLINT: implicit on purpose
  static RankingRule standard(double r) { return RankingRule(rules::Standard{r}); }
  static RankingRule subtractive(double r) { return RankingRule(rules::Subtractive{r}); }
  static RankingRule impression_reserve(double rho) {
    return RankingRule(rules::ImpressionReserve{rho});
  }
  static RankingRule two_param(double r, double rho) {
    return RankingRule(rules::TwoParam{r, rho});
  }
  static RankingRule optimal(std::vector<PsiFunction> psi, double score_reserve = 0.0) {
    return RankingRule(rules::OptimalPsi{std::move(psi), score_reserve});
  }

  const Kind& kind() const { return kind_; }
  std::string name() const;

  ScoreResult score(double b, double w, std::size_t bidder = 0) const;
  // Smallest bid whose score reaches y (may lie below the eligibility floor).
  double inverse_score(double y, double w, std::size_t bidder = 0) const;
  // Smallest eligible bid.
  double floor(double w, std::size_t bidder = 0) const;
  bool linear_in_bid(std::size_t bidder = 0) const;
  // Range of bids the score can be evaluated on.
  double min_bid(std::size_t bidder = 0) const;
  double max_bid(std::size_t bidder = 0) const;

 private:
  const PsiFunction& psi_for(std::size_t bidder) const;
  Kind kind_;
};

ScoreResult score(const RankingRule& rule, double b, double w, std::size_t bidder = 0);

struct AuctionOutcome {
  std::vector<std::optional<std::size_t>> assignment;  // slot -> bidder
  std::vector<std::optional<std::size_t>> position;    // bidder -> slot
  std::vector<double> scores;
  std::vector<bool> eligible;
  std::vector<double> effects;  // slot effect received per bidder (0 if none)
  std::vector<double> prices;   // per-click price per bidder (0 if none / unpriced)
  MetricsRecord metrics;

  std::size_t allocated() const;
};

// Ranks eligible bidders by score (ties to the lower index) into the slots.
AuctionOutcome allocate(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                        const SlotLayout& slots);

// Myerson threshold prices, per bidder (0 for unallocated bidders).
std::vector<double> truthful_payments(const RankingRule& rule,
                                      const std::vector<BidderProfile>& bidders,
                                      const SlotLayout& slots);
std::vector<double> truthful_payments(const RankingRule& rule,
                                      const std::vector<BidderProfile>& bidders,
                                      const SlotLayout& slots, const AuctionOutcome& out);

// Next-score prices floored at the eligibility floor.
std::vector<double> gsp_payments(const RankingRule& rule,
                                 const std::vector<BidderProfile>& bidders,
                                 const SlotLayout& slots);
std::vector<double> gsp_payments(const RankingRule& rule,
                                 const std::vector<BidderProfile>& bidders,
                                 const SlotLayout& slots, const AuctionOutcome& out);

enum class PaymentRule { Truthful, Gsp };

// Allocation, prices and per-auction metrics in one call.
AuctionOutcome run_auction(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                           const SlotLayout& slots, PaymentRule payment);

// Bid profile under GSP that reproduces the truthful allocation and prices.
// UnsupportedRule when the score is not linear in the bid.
std::vector<double> lowest_sne_bids(const RankingRule& rule,
                                    const std::vector<BidderProfile>& types,
                                    const SlotLayout& slots);

// Price at which bidder i would take j's slot: the bid matching j's score at
// j's price in i's own bid space, floored at i's eligibility floor.
double envy_price(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                  std::size_t i, std::size_t j, double price_j);

struct SneVerdict {
  bool ok = true;
  std::string violation;
};

// Envy-freeness for every ordered pair, then grid Nash deviations over
// [0, t_i] (deviation_grid + 1 points) under GSP pricing.
SneVerdict verify_sne(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                      const SlotLayout& slots, std::size_t deviation_grid, bool conservative);

}  // namespace adtrade
