#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adtrade/metrics.hpp"
#include "adtrade/objectives.hpp"
#include "adtrade/position_auction.hpp"
#include "adtrade/valuations.hpp"

namespace adtrade {

enum class ConstraintSense { AtLeast, Equal };

// alpha * revenue + beta * welfare + gamma * clicks (>= | =) bound
struct LinearConstraint {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double bound = 0.0;
  ConstraintSense sense = ConstraintSense::AtLeast;

  void validate() const;
  double apply(const MetricsRecord& m) const {
    return alpha * m.revenue + beta * m.welfare + gamma * m.clicks;
  }
};

// Bidder with finitely many types (ascending) and their probabilities.
struct DiscreteBidder {
  std::vector<double> types;
  std::vector<double> probs;
  double weight = 1.0;

  void validate() const;
};

// phi(t_k) = t_k - (t_{k+1} - t_k) (1 - F(t_k)) / p_k, last type maps to itself.
std::vector<double> discrete_virtual_values(const DiscreteBidder& b);
bool is_regular(const DiscreteBidder& b);

// ---- ad cap -----------------------------------------------------------------

// A single-slot search term. Bidders are either continuous models (sampled)
// or discrete bidders (enumerated exactly); exactly one list is non-empty.
struct AdCapTerm {
  double probability = 1.0;
  double slot_effect = 1.0;
  ObjectiveWeights weights{};
  std::vector<BidderModel> bidders;
  std::vector<DiscreteBidder> discrete;
};

struct AdCapProblem {
  std::vector<AdCapTerm> terms;
  double cap = 1.0;  // expected impressions per query

  void validate() const;
};

// Distribution of the winning score w * psi within one term. Each atom holds
// its probability and the probability-weighted winner quantities.
struct ScoreAtom {
  double score = 0.0;
  double prob = 0.0;
  double welfare = 0.0;  // prob * E[w t | atom]
  double clicks = 0.0;   // prob * E[w | atom]
  double revenue = 0.0;  // prob * E[w phi | atom]
};

// Atoms sorted by descending score, equal scores merged.
std::vector<ScoreAtom> winner_score_atoms(const AdCapTerm& term, const EstimatorConfig& est,
                                          std::size_t term_index = 0);

struct AdCapTermReport {
  double score_reserve = 0.0;  // lambda / s_j
  double impressions = 0.0;    // Pr[shown] within the term
};

struct AdCapSolution {
  double lambda = 0.0;
  double achieved = 0.0;   // expected impressions
  double objective = 0.0;  // sum_j q_j s_j E[w psi 1{shown}]
  double tie_fraction = 1.0;  // share of threshold-score mass that is shown
  std::vector<AdCapTermReport> terms;
  MetricsRecord metrics;
};

// Per-impression reserve lambda / s_j that meets the cap. Breakpoints of the
// impression curve are swept exactly and the threshold atom is randomized so
// that the cap binds exactly when lambda > 0.
AdCapSolution solve_ad_cap(const AdCapProblem& p, double tol, const EstimatorConfig& est);

// sum_j q_j Pr[max_i w psi >= lambda / s_j]
double expected_impressions(const AdCapProblem& p, double lambda, const EstimatorConfig& est);

// ---- frontiers --------------------------------------------------------------

enum class Metric { Revenue, Welfare, Clicks, Impressions };
enum class Sense { Minimize, Maximize };

struct Axis {
  Metric metric = Metric::Impressions;
  Sense sense = Sense::Minimize;
};

double metric_value(const MetricsRecord& m, Metric k);
Metric parse_metric(const std::string& name);
std::string metric_name(Metric k);

struct RuleParams {
  std::string rule;
  double r = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct FrontierPoint {
  RuleParams params;
  MetricsRecord metrics;
  MetricsRecord stderr_;
};

// Keeps points not dominated on (x, y); exact duplicates are all kept.
std::vector<FrontierPoint> pareto_filter(const std::vector<FrontierPoint>& points, Axis x,
                                         Axis y);

struct GridRule {
  RuleParams params;
  RankingRule rule;
};

std::vector<FrontierPoint> evaluate_grid(const Scenario& sc, const std::vector<GridRule>& grid,
                                         Pricing pricing, const EstimatorConfig& est);

// Default axes: minimize impressions, maximize revenue (upper-left).
std::vector<FrontierPoint> build_frontier(const Scenario& sc, const std::vector<GridRule>& grid,
                                          Pricing pricing, const EstimatorConfig& est,
                                          Axis x = {Metric::Impressions, Sense::Minimize},
                                          Axis y = {Metric::Revenue, Sense::Maximize});

struct ConcavityVerdict {
  bool ok = true;
  std::size_t index = 0;   // offending interior point (sorted order)
  double deficit = 0.0;    // chord value minus point value
  std::string message;
};

// Sorts by the x metric and requires every interior point to lie on or above
// the chord of its neighbours, minus k_sigma combined standard errors plus
// abs_slack.
ConcavityVerdict concavity_check(std::vector<FrontierPoint> points, Axis x, Axis y,
                                 double k_sigma = 3.0, double abs_slack = 1e-9);

// ---- discrete instances and duality ----------------------------------------

struct DiscreteInstance {
  std::vector<DiscreteBidder> bidders;
  SlotLayout slots;

  void validate() const;
  std::size_t profile_count() const;
};

// Raw coefficients of psi = a * phi + b * t + c (any sign).
struct PsiCoefficients {
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 0.0;
};

// Exact expected metrics of ranking by w * psi (non-negative scores seated).
// Revenue is computed from the threshold payments of the monotone allocation.
MetricsRecord discrete_psi_metrics(const DiscreteInstance& inst, const PsiCoefficients& c);

// E[sum_i w_i psi_i s_i x_i] of the same ranking (virtual objective).
double discrete_psi_value(const DiscreteInstance& inst, const PsiCoefficients& c);

struct DualityOptions {
  std::size_t grid = 9;           // lambda points per dimension per round
  std::size_t refinements = 60;   // zoom rounds
  std::size_t policy_budget = 2000000;
};

enum class DualityStatus { Ok, Infeasible };

struct DualityReport {
  DualityStatus status = DualityStatus::Ok;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  bool strictly_feasible = false;
  std::vector<double> lambda;
  std::size_t policies = 0;  // distinct primal columns
};

// Primal: best mixture of monotone priority policies (interleavings of
// (bidder, type) pairs plus an eligibility cutoff) meeting the constraints.
// Dual: min over lambda of the shifted-weight psi ranking value minus
// lambda . theta.
DualityReport duality_gap_check(const DiscreteInstance& inst, const ObjectiveWeights& w0,
                                const std::vector<LinearConstraint>& constraints,
                                const DualityOptions& opt = {});

// Sweeps objective weights and evaluates the psi ranking for each.
std::vector<FrontierPoint> discrete_weight_sweep(const DiscreteInstance& inst,
                                                 const std::vector<ObjectiveWeights>& weights);

}  // namespace adtrade
