#include "adtrade/objectives.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "adtrade/errors.hpp"
#include "adtrade/parallel.hpp"

namespace adtrade {

namespace {

std::array<double, 4> as_array(const MetricsRecord& m) {
  return {m.revenue, m.welfare, m.clicks, m.impressions};
}

MetricsRecord from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

}  // namespace

void Scenario::validate() const {
  if (bidders.empty()) throw ConfigError("scenario needs at least one bidder");
  for (const auto& b : bidders) {
    if (!(b.correlation >= -1.0 && b.correlation <= 1.0))
      throw ConfigError("correlation must lie in [-1, 1]");
    if (!b.weight.dist && !(b.weight.fixed > 0.0 && std::isfinite(b.weight.fixed)))
      throw ConfigError("fixed weight must be finite and positive");
  }
  slots.validate();
}

void EstimatorConfig::validate() const {
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SampleRng::SampleRng(std::uint64_t seed, std::uint64_t index)
    : key_(splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL))) {}

SampleRng::result_type SampleRng::operator()() {
  ++counter_;
  return splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double SampleRng::uniform() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

void draw_types(const std::vector<BidderModel>& models, SampleRng& rng,
                std::vector<BidderProfile>& out) {
  static const boost::math::normal_distribution<double> kStd(0.0, 1.0);
  out.resize(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const BidderModel& m = models[i];
    double u1 = rng.uniform();
    double u2 = rng.uniform();
    if (m.weight.dist && m.correlation != 0.0) {
      const double z1 = boost::math::quantile(kStd, u1);
      const double e = boost::math::quantile(kStd, u2);
      const double z2 = m.correlation * z1 + std::sqrt(1.0 - m.correlation * m.correlation) * e;
      u2 = boost::math::cdf(kStd, z2);
    }
    out[i].value = m.value.quantile(u1);
    out[i].weight = m.weight.dist ? m.weight.dist->quantile(u2) : m.weight.fixed;
    out[i].bid = out[i].value;
  }
}

void MetricsAccumulator::add(const MetricsRecord& m) {
  const auto x = as_array(m);
  ++n_;
  const double n = static_cast<double>(n_);
  for (std::size_t k = 0; k < 4; ++k) {
    const double d = x[k] - mean_[k];
    mean_[k] += d / n;
    m2_[k] += d * (x[k] - mean_[k]);
  }
}

void MetricsAccumulator::merge(const MetricsAccumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double n = na + nb;
  for (std::size_t k = 0; k < 4; ++k) {
    const double d = o.mean_[k] - mean_[k];
    mean_[k] += d * nb / n;
    m2_[k] += o.m2_[k] + d * d * na * nb / n;
  }
  n_ += o.n_;
}

MetricsEstimate MetricsAccumulator::estimate() const {
  MetricsEstimate e;
  e.samples = n_;
  e.mean = from_array(mean_);
  std::array<double, 4> se{};
  if (n_ > 1) {
    const double n = static_cast<double>(n_);
    for (std::size_t k = 0; k < 4; ++k) se[k] = std::sqrt(std::max(0.0, m2_[k]) / (n - 1.0) / n);
  }
  e.stderr_ = from_array(se);
  return e;
}

MetricsRecord outcome_metrics(const AuctionOutcome& outcome,
                              const std::vector<BidderProfile>& bidders) {
  MetricsRecord m;
  for (std::size_t i = 0; i < bidders.size(); ++i) {
    if (!outcome.position[i]) continue;
    const double clicks = bidders[i].weight * outcome.effects[i];
    m.impressions += 1.0;
    m.clicks += clicks;
    m.welfare += bidders[i].value * clicks;
    m.revenue += outcome.prices[i] * clicks;
  }
  return m;
}

MetricsEstimate estimate_metrics(const Scenario& sc, const RankingRule& rule, Pricing pricing,
                                 const EstimatorConfig& est) {
  sc.validate();
  est.validate();
  if (pricing == Pricing::LowestSneGsp) {
    for (std::size_t i = 0; i < sc.bidders.size(); ++i)
      if (!rule.linear_in_bid(i))
        throw UnsupportedRule("lowest-SNE GSP pricing needs a rule linear in the bid");
  }
  const std::size_t batches = (est.samples + est.batch - 1) / est.batch;
  std::vector<MetricsAccumulator> parts(batches);
  parallel_for(batches, est.threads, [&](std::size_t b) {
    std::vector<BidderProfile> bidders;
    const std::size_t begin = b * est.batch;
    const std::size_t end = std::min(est.samples, begin + est.batch);
    MetricsAccumulator acc;
    for (std::size_t idx = begin; idx < end; ++idx) {
      SampleRng rng(est.seed, idx);
      draw_types(sc, rng, bidders);
      if (pricing == Pricing::LowestSneGsp) {
        const std::vector<double> bids = lowest_sne_bids(rule, bidders, sc.slots);
        for (std::size_t i = 0; i < bidders.size(); ++i) bidders[i].bid = bids[i];
        acc.add(run_auction(rule, bidders, sc.slots, PaymentRule::Gsp).metrics);
      } else {
        acc.add(run_auction(rule, bidders, sc.slots, PaymentRule::Truthful).metrics);
      }
    }
    parts[b] = acc;
  });
  MetricsAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.estimate();
}

double obj_value(const ObjectiveWeights& w, const MetricsRecord& m) {
  return w.alpha * m.revenue + w.beta * m.welfare + w.gamma * m.clicks;
}

}  // namespace adtrade
