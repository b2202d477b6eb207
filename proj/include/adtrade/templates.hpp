#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adtrade/position_auction.hpp"
#include "adtrade/valuations.hpp"

namespace adtrade {

struct ClassedBidder {
  std::size_t cls = 0;
  double value = 0.0;
  double weight = 1.0;
  double bid = 0.0;
};

// One page layout: class_effects[c] is the slot-effect vector of class c
// (possibly empty), non-increasing.
struct Template {
  std::vector<std::vector<double>> class_effects;
};

struct TemplateSet {
  std::size_t num_classes = 0;
  std::vector<Template> templates;

  void validate() const;
  std::size_t size() const { return templates.size(); }
  const std::vector<double>& effects(std::size_t j, std::size_t c) const;
};

bool is_class_selection(const TemplateSet& ts, double tol = 1e-9);

// How the template is chosen from the class rankings.
//   Standard: total w psi(b) s of the best assignment.
//   TopCapped: as Standard with each class's top score replaced by its second.
//   SecondHighest: each class contributes its second score times the sum of
//     its slot effects (requires a class-selection template set).
enum class Selection { Standard, TopCapped, SecondHighest };
enum class TemplatePricing { Considerate, Indifferent };

struct TemplateGame {
  std::vector<ClassedBidder> bidders;
  std::vector<PsiFunction> class_psi;  // one per class
  TemplateSet templates;

  void validate() const;
  std::vector<double> values() const;
  std::vector<double> bids() const;
};

struct TemplateOutcome {
  std::size_t chosen = 0;
  std::vector<double> template_values;                // selection objective per template
  std::vector<std::vector<std::size_t>> class_order;  // eligible bidders per class, best first
  std::vector<std::optional<std::size_t>> position;   // slot within own class, chosen template
  std::vector<double> effects;                        // received slot effect per bidder
  std::vector<double> prices;                         // per-click, 0 when unpriced
  double objective = 0.0;                             // sum w psi(b) s of the assignment
};

TemplateOutcome allocate_templates(const TemplateGame& g, const std::vector<double>& bids,
                                   Selection sel = Selection::Standard);

// Selection restricted to the second score of each class.
TemplateOutcome second_highest_allocate(const TemplateGame& g, const std::vector<double>& bids);

// GSP inside each class of the chosen template, ignoring the other templates.
std::vector<double> template_indifferent_gsp(const TemplateGame& g, const std::vector<double>& bids,
                                             const TemplateOutcome& out);

// max(within-class GSP price, smallest own bid that keeps the chosen template).
std::vector<double> template_considerate_gsp(const TemplateGame& g, const std::vector<double>& bids,
                                             const TemplateOutcome& out,
                                             Selection sel = Selection::Standard);

// Allocation and prices. When `only` is set, just that bidder is priced.
TemplateOutcome run_template_auction(const TemplateGame& g, const std::vector<double>& bids,
                                     Selection sel, TemplatePricing pricing,
                                     std::optional<std::size_t> only = std::nullopt);

// Threshold prices from a sweep of each winner's own bid on [0, b_i].
std::vector<double> truthful_template_payments(const TemplateGame& g,
                                               const std::vector<double>& bids,
                                               std::size_t grid,
                                               Selection sel = Selection::Standard);

// Per-click Myerson price for a monotone step function effect(b) on [lo, bid].
double myerson_price(const std::function<double(double)>& effect, double lo, double bid,
                     std::size_t grid);

// ---- generic SNE verification ----------------------------------------------

struct PricedOutcome {
  std::vector<double> effects;
  std::vector<double> prices;
};

// bids -> effects and prices; `only` restricts pricing to one bidder.
using Mechanism =
    std::function<PricedOutcome(const std::vector<double>& bids, std::optional<std::size_t> only)>;

struct VerifyOptions {
  std::size_t deviation_grid = 1000;
  bool conservative = true;
  // Extra deviation bids per bidder (e.g. proof thresholds).
  std::vector<std::vector<double>> anchors;
  // Deviate only to the anchors (used to re-check grid search results).
  bool anchors_only = false;
};

// Envy-freeness within classes, then grid Nash deviations over [0, t_i].
SneVerdict verify_sne_generic(const Mechanism& mech, const std::vector<ClassedBidder>& bidders,
                              const std::vector<PsiFunction>& class_psi,
                              const std::vector<double>& bids, const VerifyOptions& opt);

SneVerdict verify_template_sne(const TemplateGame& g, const std::vector<double>& bids,
                               TemplatePricing pricing, Selection sel, const VerifyOptions& opt);

// ---- MITA -------------------------------------------------------------------

struct MitaInstance {
  std::vector<double> text_slots;  // s_T, non-increasing
  double image_slot = 1.0;         // s_I
  std::vector<ClassedBidder> text;
  std::vector<ClassedBidder> image;
  PsiFunction text_psi = PsiFunction::identity();
  PsiFunction image_psi = PsiFunction::identity();

  void validate() const;
  // Bidders in mechanism order: text first, then image, with classes 0 / 1.
  std::vector<ClassedBidder> all_bidders() const;
  std::vector<double> values() const;
};

// chosen = number of text ads shown, 0 when the image ad (or nothing) is shown.
TemplateOutcome mita_allocate(const MitaInstance& m, const std::vector<double>& bids);

// Considerate GSP: next score in class, or the smallest bid keeping the slot.
std::vector<double> mita_considerate_gsp(const MitaInstance& m, const std::vector<double>& bids,
                                         const TemplateOutcome& out,
                                         std::optional<std::size_t> only = std::nullopt);

std::vector<double> mita_truthful_payments(const MitaInstance& m, const std::vector<double>& bids,
                                           std::size_t grid);

Mechanism mita_mechanism(const MitaInstance& m);

// Bids implementing the truthful outcome. Throws InternalError when the
// constructed profile fails verification.
std::vector<double> mita_sne_construct(const MitaInstance& m, std::size_t deviation_grid = 2000);

// ---- grid search ------------------------------------------------------------

struct GridSearchOptions {
  TemplatePricing pricing = TemplatePricing::Considerate;
  Selection selection = Selection::Standard;
  std::size_t points = 15;  // equispaced points per bidder, endpoints included
  bool conservative = true;
  double upper_factor = 1.5;  // non-conservative grids span [0, factor * max value]
  std::vector<std::vector<double>> anchors;  // extra grid points per bidder
  double budget = 5e9;                       // max profiles
  unsigned threads = 1;
};

struct GridSearchResult {
  std::optional<std::vector<double>> found;
  std::vector<std::size_t> resolution;  // grid size per bidder
  double profiles = 0.0;                // grid size product
  double examined = 0.0;                // profiles surviving the per-class envy filter
};

// First grid profile passing the envy checks and the Nash checks with the
// grid as deviation set. Profiles are ordered class by class (class 0 most
// significant), lexicographically by bidder index inside a class; this is
// plain lexicographic order when bidders are listed class by class.
// BudgetError when the grid size product exceeds opt.budget.
GridSearchResult sne_grid_search(const TemplateGame& g, const GridSearchOptions& opt);

std::vector<std::vector<double>> search_grids(const TemplateGame& g, const GridSearchOptions& opt);

// ---- counterexamples --------------------------------------------------------

enum class CounterexampleKind { NonImplementation, TcNonexistence, TcUnoptimal, TiNonexistence };

CounterexampleKind parse_counterexample(const std::string& name);
std::string counterexample_name(CounterexampleKind k);

struct CounterexampleParams {
  std::optional<double> eps;  // default: 1e-3 times the smallest value gap
  std::size_t m = 10;
  double delta = 0.1;
  std::optional<std::size_t> grid;  // grid points per bidder for searches
  std::vector<std::size_t> trend{6, 10, 14};
  unsigned threads = 1;
};

struct CounterexampleReport {
  std::string name;
  std::string claim;
  bool reproduced = false;
  TemplateGame game;
  std::vector<double> bids;  // witness profile when one exists
  std::vector<std::string> details;
  // numeric results keyed by name (ratios, gaps, resolution)
  std::vector<std::pair<std::string, double>> numbers;
};

TemplateGame non_implementation_game(double eps);
TemplateGame tc_nonexistence_game(double eps);
TemplateGame tc_unoptimal_game(std::size_t m, double eps);
TemplateGame ti_nonexistence_game(double delta, double eps);

CounterexampleReport counterexample(CounterexampleKind kind, const CounterexampleParams& p);

}  // namespace adtrade
