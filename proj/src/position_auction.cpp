#include "adtrade/position_auction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "adtrade/errors.hpp"

namespace adtrade {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_reserve(double x, const char* what) {
  if (!std::isfinite(x) || x < 0.0) {
    std::ostringstream os;
    os << what << " must be finite and >= 0, got " << x;
    throw DomainError(os.str());
  }
}

}  // namespace

void SlotLayout::validate() const {
  if (effects.empty()) throw DomainError("slot layout needs at least one slot");
  for (std::size_t k = 0; k < effects.size(); ++k) {
    if (!(effects[k] > 0.0) || !std::isfinite(effects[k]))
      throw DomainError("slot effects must be finite and positive");
    if (k > 0 && effects[k] > effects[k - 1])
      throw DomainError("slot effects must be non-increasing");
  }
}

RankingRule::RankingRule(Kind k) : kind_(std::move(k)) {
  std::visit(Overloaded{
                 [](const rules::Standard& s) { check_reserve(s.r, "r"); },
                 [](const rules::Subtractive& s) { check_reserve(s.r, "r"); },
                 [](const rules::ImpressionReserve& s) { check_reserve(s.rho, "rho"); },
                 [](const rules::TwoParam& s) {
                   check_reserve(s.r, "r");
                   check_reserve(s.rho, "rho");
                 },
                 [](const rules::OptimalPsi& s) {
                   if (s.psi.empty()) throw DomainError("OptimalPsi needs at least one psi");
                   check_reserve(s.score_reserve, "score reserve");
                 },
             },
             kind_);
}

std::string RankingRule::name() const {
  return std::visit(Overloaded{
                        [](const rules::Standard&) { return std::string("standard"); },
                        [](const rules::Subtractive&) { return std::string("subtractive"); },
                        [](const rules::ImpressionReserve&) { return std::string("impression"); },
                        [](const rules::TwoParam&) { return std::string("two-param"); },
                        [](const rules::OptimalPsi&) { return std::string("optimal"); },
                    },
                    kind_);
}

const PsiFunction& RankingRule::psi_for(std::size_t bidder) const {
  const auto& o = std::get<rules::OptimalPsi>(kind_);
  if (o.psi.size() == 1) return o.psi.front();
  if (bidder >= o.psi.size()) throw DomainError("OptimalPsi: no psi for bidder");
  return o.psi[bidder];
}

ScoreResult RankingRule::score(double b, double w, std::size_t bidder) const {
  return std::visit(
      Overloaded{
          [&](const rules::Standard& s) { return ScoreResult{w * b, b >= s.r}; },
          [&](const rules::Subtractive& s) { return ScoreResult{w * (b - s.r), b >= s.r}; },
          [&](const rules::ImpressionReserve& s) { return ScoreResult{w * b, w * b >= s.rho}; },
          [&](const rules::TwoParam& s) {
            const double sc = w * (b - s.r);
            return ScoreResult{sc, b >= s.r && sc >= s.rho};
          },
          [&](const rules::OptimalPsi& s) {
            const double p = psi_for(bidder)(b);
            const double sc = w * p;
            return ScoreResult{sc, p >= 0.0 && sc >= s.score_reserve};
          },
      },
      kind_);
}

double RankingRule::inverse_score(double y, double w, std::size_t bidder) const {
  return std::visit(Overloaded{
                        [&](const rules::Standard&) { return y / w; },
                        [&](const rules::Subtractive& s) { return s.r + y / w; },
                        [&](const rules::ImpressionReserve&) { return y / w; },
                        [&](const rules::TwoParam& s) { return s.r + y / w; },
                        [&](const rules::OptimalPsi&) { return psi_for(bidder).inverse(y / w); },
                    },
                    kind_);
}

double RankingRule::floor(double w, std::size_t bidder) const {
  return std::visit(Overloaded{
                        [&](const rules::Standard& s) { return s.r; },
                        [&](const rules::Subtractive& s) { return s.r; },
                        [&](const rules::ImpressionReserve& s) { return s.rho / w; },
                        [&](const rules::TwoParam& s) { return s.r + s.rho / w; },
                        [&](const rules::OptimalPsi& s) {
                          return std::max(0.0, psi_for(bidder).inverse(s.score_reserve / w));
                        },
                    },
                    kind_);
}

bool RankingRule::linear_in_bid(std::size_t bidder) const {
  if (const auto* o = std::get_if<rules::OptimalPsi>(&kind_)) {
    (void)o;
    return psi_for(bidder).is_linear();
  }
  return true;
}

double RankingRule::min_bid(std::size_t bidder) const {
  if (std::holds_alternative<rules::OptimalPsi>(kind_)) return psi_for(bidder).lower();
  return 0.0;
}

double RankingRule::max_bid(std::size_t bidder) const {
  if (std::holds_alternative<rules::OptimalPsi>(kind_)) return psi_for(bidder).upper();
  return kInf;
}

ScoreResult score(const RankingRule& rule, double b, double w, std::size_t bidder) {
  if (!std::isfinite(b) || !std::isfinite(w) || !(w > 0.0))
    throw DomainError("score: need finite bid and positive weight");
  return rule.score(b, w, bidder);
}

std::size_t AuctionOutcome::allocated() const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [](const auto& a) { return a.has_value(); }));
}

AuctionOutcome allocate(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                        const SlotLayout& slots) {
  const std::size_t n = bidders.size();
  AuctionOutcome out;
  out.assignment.assign(slots.size(), std::nullopt);
  out.position.assign(n, std::nullopt);
  out.scores.resize(n);
  out.eligible.resize(n);
  out.effects.assign(n, 0.0);
  out.prices.assign(n, 0.0);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ScoreResult s = rule.score(bidders[i].bid, bidders[i].weight, i);
    out.scores[i] = s.score;
    out.eligible[i] = s.eligible;
    if (s.eligible) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  const std::size_t shown = std::min(order.size(), slots.size());
  for (std::size_t k = 0; k < shown; ++k) {
    out.assignment[k] = order[k];
    out.position[order[k]] = k;
    out.effects[order[k]] = slots[k];
  }
  return out;
}

std::vector<double> truthful_payments(const RankingRule& rule,
                                      const std::vector<BidderProfile>& bidders,
                                      const SlotLayout& slots, const AuctionOutcome& out) {
  const std::size_t n = bidders.size(), K = slots.size();
  std::vector<double> prices(n, 0.0);
  std::vector<double> rivals;
  rivals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.position[i]) continue;
    const std::size_t k = *out.position[i];
    const double w = bidders[i].weight;
    const double fl = rule.floor(w, i);
    rivals.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && out.eligible[j]) rivals.push_back(out.scores[j]);
    std::sort(rivals.begin(), rivals.end(), std::greater<>());
    double pay = 0.0;
    for (std::size_t m = k; m < K; ++m) {
      const double next = m + 1 < K ? slots[m + 1] : 0.0;
      const double tau = m < rivals.size() ? std::max(rule.inverse_score(rivals[m], w, i), fl) : fl;
      if (!std::isfinite(tau)) throw DomainError("truthful_payments: threshold not invertible");
      pay += (slots[m] - next) * tau;
    }
    prices[i] = pay / slots[k];
  }
  return prices;
}

std::vector<double> truthful_payments(const RankingRule& rule,
                                      const std::vector<BidderProfile>& bidders,
                                      const SlotLayout& slots) {
  return truthful_payments(rule, bidders, slots, allocate(rule, bidders, slots));
}

std::vector<double> gsp_payments(const RankingRule& rule,
                                 const std::vector<BidderProfile>& bidders,
                                 const SlotLayout& slots, const AuctionOutcome& out) {
  const std::size_t n = bidders.size();
  std::vector<double> prices(n, 0.0);
  // eligible bidders in rank order, including those below the last slot
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i)
    if (out.eligible[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  for (std::size_t k = 0; k < order.size() && k < slots.size(); ++k) {
    const std::size_t i = order[k];
    const double fl = rule.floor(bidders[i].weight, i);
    double p = fl;
    if (k + 1 < order.size())
      p = std::max(rule.inverse_score(out.scores[order[k + 1]], bidders[i].weight, i), fl);
    prices[i] = p;
  }
  return prices;
}

std::vector<double> gsp_payments(const RankingRule& rule,
                                 const std::vector<BidderProfile>& bidders,
                                 const SlotLayout& slots) {
  return gsp_payments(rule, bidders, slots, allocate(rule, bidders, slots));
}

AuctionOutcome run_auction(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                           const SlotLayout& slots, PaymentRule payment) {
  AuctionOutcome out = allocate(rule, bidders, slots);
  out.prices = payment == PaymentRule::Truthful ? truthful_payments(rule, bidders, slots, out)
                                                : gsp_payments(rule, bidders, slots, out);
  MetricsRecord m;
  for (std::size_t i = 0; i < bidders.size(); ++i) {
    if (!out.position[i]) continue;
    const double clicks = bidders[i].weight * out.effects[i];
    m.impressions += 1.0;
    m.clicks += clicks;
    m.welfare += bidders[i].value * clicks;
    m.revenue += out.prices[i] * clicks;
  }
  out.metrics = m;
  return out;
}

std::vector<double> lowest_sne_bids(const RankingRule& rule,
                                    const std::vector<BidderProfile>& types,
                                    const SlotLayout& slots) {
  const std::size_t n = types.size();
  for (std::size_t i = 0; i < n; ++i)
    if (!rule.linear_in_bid(i))
      throw UnsupportedRule(
          "lowest_sne_bids needs a score linear in the bid; use a linear psi approximation");
  std::vector<BidderProfile> truthful = types;
  for (auto& b : truthful) b.bid = b.value;
  const AuctionOutcome out = allocate(rule, truthful, slots);
  const std::vector<double> prices = truthful_payments(rule, truthful, slots, out);
  std::vector<double> bids(n);
  for (std::size_t i = 0; i < n; ++i) bids[i] = types[i].value;
  const std::size_t shown = out.allocated();
  for (std::size_t k = shown; k-- > 1;) {
    const std::size_t j = *out.assignment[k];
    const std::size_t u = *out.assignment[k - 1];
    const double target = rule.score(prices[u], types[u].weight, u).score;
    // Above t_j only when u pays its floor, which any bid up to t_j keeps.
    const double b = std::min(rule.inverse_score(target, types[j].weight, j), types[j].value);
    bids[j] = std::max(b, rule.floor(types[j].weight, j));
  }
  return bids;
}

double envy_price(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                  std::size_t i, std::size_t j, double price_j) {
  const double sc = rule.score(price_j, bidders[j].weight, j).score;
  return std::max(rule.inverse_score(sc, bidders[i].weight, i), rule.floor(bidders[i].weight, i));
}

SneVerdict verify_sne(const RankingRule& rule, const std::vector<BidderProfile>& bidders,
                      const SlotLayout& slots, std::size_t deviation_grid, bool conservative) {
  const std::size_t n = bidders.size();
  std::ostringstream os;
  if (conservative) {
    for (std::size_t i = 0; i < n; ++i)
      if (bidders[i].bid > bidders[i].value + 1e-12) {
        os << "bidder " << i << " bids " << bidders[i].bid << " above value " << bidders[i].value;
        return {false, os.str()};
      }
  }
  const AuctionOutcome out = run_auction(rule, bidders, slots, PaymentRule::Gsp);
  auto tol = [&](std::size_t i) { return 1e-9 * (1.0 + std::abs(bidders[i].value)); };

  for (std::size_t i = 0; i < n; ++i) {
    const double own = out.effects[i] * (bidders[i].value - out.prices[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || out.effects[j] == 0.0) continue;
      const double pi = envy_price(rule, bidders, i, j, out.prices[j]);
      const double alt = out.effects[j] * (bidders[i].value - pi);
      if (alt > own + tol(i)) {
        os << "envy: bidder " << i << " prefers slot " << *out.position[j] << " of bidder " << j
           << " (" << alt << " > " << own << ")";
        return {false, os.str()};
      }
    }
  }

  double bid_cap = 0.0;
  for (const auto& b : bidders) bid_cap = std::max({bid_cap, b.bid, b.value});
  std::vector<BidderProfile> dev = bidders;
  for (std::size_t i = 0; i < n; ++i) {
    const double own = out.effects[i] * (bidders[i].value - out.prices[i]);
    double lo = std::max(0.0, rule.min_bid(i));
    double hi = conservative ? bidders[i].value : 2.0 * bid_cap;
    hi = std::min(hi, rule.max_bid(i));
    if (hi < lo) continue;
    const std::size_t steps = std::max<std::size_t>(deviation_grid, 1);
    for (std::size_t g = 0; g <= steps; ++g) {
      const double b = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(steps);
      dev[i].bid = b;
      const AuctionOutcome o = allocate(rule, dev, slots);
      if (!o.position[i]) continue;
      const double p = gsp_payments(rule, dev, slots, o)[i];
      const double u = o.effects[i] * (bidders[i].value - p);
      if (u > own + tol(i)) {
        os << "deviation: bidder " << i << " gains by bidding " << b << " (" << u << " > " << own
           << ")";
        return {false, os.str()};
      }
    }
    dev[i].bid = bidders[i].bid;
  }
  return {};
}

}  // namespace adtrade
