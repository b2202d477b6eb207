#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "adtrade/metrics.hpp"
#include "adtrade/position_auction.hpp"
#include "adtrade/valuations.hpp"

namespace adtrade {

// Ad effect: either a constant or drawn from a distribution.
struct WeightSpec {
  double fixed = 1.0;
  std::optional<ValueDistribution> dist;

  static WeightSpec constant(double w) { return {w, std::nullopt}; }
  static WeightSpec random(ValueDistribution d) { return {1.0, std::move(d)}; }
};

struct BidderModel {
  ValueDistribution value;
  WeightSpec weight;
  double correlation = 0.0;  // Gaussian copula coefficient between t and w
};

struct Scenario {
  std::vector<BidderModel> bidders;
  SlotLayout slots;

  void validate() const;
};

struct EstimatorConfig {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t batch = 1024;
  unsigned threads = 1;  // 0 = hardware concurrency

  void validate() const;
};

enum class Pricing { Truthful, LowestSneGsp };

struct MetricsEstimate {
  MetricsRecord mean;
  MetricsRecord stderr_;
  std::size_t samples = 0;
};

// Counter-based generator: the stream for (seed, index) is a pure function of
// both, so sample i sees the same draws whichever thread evaluates it.
class SampleRng {
 public:
  using result_type = std::uint64_t;
  SampleRng(std::uint64_t seed, std::uint64_t index);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();
  // Uniform on the open interval (0, 1).
  double uniform();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Draws (t, w) for every bidder model; bids are set to the values.
void draw_types(const std::vector<BidderModel>& models, SampleRng& rng,
                std::vector<BidderProfile>& out);
inline void draw_types(const Scenario& sc, SampleRng& rng, std::vector<BidderProfile>& out) {
  draw_types(sc.bidders, rng, out);
}

// Streaming mean / variance over the four metrics (Welford, mergeable).
class MetricsAccumulator {
 public:
  void add(const MetricsRecord& m);
  void merge(const MetricsAccumulator& o);
  std::size_t count() const { return n_; }
  MetricsEstimate estimate() const;

 private:
  std::size_t n_ = 0;
  std::array<double, 4> mean_{};
  std::array<double, 4> m2_{};
};

MetricsRecord outcome_metrics(const AuctionOutcome& outcome,
                              const std::vector<BidderProfile>& bidders);

// Monte Carlo expectation of the metrics. Samples are split into fixed
// batches and merged in batch order, so the result does not depend on the
// thread count.
MetricsEstimate estimate_metrics(const Scenario& sc, const RankingRule& rule, Pricing pricing,
                                 const EstimatorConfig& est);

double obj_value(const ObjectiveWeights& w, const MetricsRecord& m);

}  // namespace adtrade
