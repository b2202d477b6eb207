#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adtrade/constrained.hpp"
#include "adtrade/objectives.hpp"
#include "adtrade/templates.hpp"

namespace adtrade {

struct ScenarioConfig {
  std::string name;
  Scenario scenario;                     // continuous bidders, may be empty
  std::optional<TemplateGame> templates;  // classes + templates block
  std::uint64_t seed = 1;
};

// JSON text -> config. ConfigError messages name the offending field path.
ScenarioConfig parse_scenario(const std::string& json_text);
// Preset name (uniform8x3, lahaie-pennock) or path to a JSON file.
ScenarioConfig load_scenario(const std::string& name_or_path);
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Template game as a scenario JSON document (linear psi only).
std::string scenario_json(const TemplateGame& g, const std::string& name);

// ---- sweeps -----------------------------------------------------------------

// "a:b:n" (n equispaced points, ends included) or a single number.
std::vector<double> parse_grid_values(const std::string& spec);

// One --grid flag: "[rule.]param=spec" with param in r, rho, alpha, beta, gamma.
struct GridAxis {
  std::string rule;  // empty: applies to every rule
  std::string param;
  std::vector<double> values;
};
GridAxis parse_grid_axis(const std::string& flag);

// Cartesian product of the axes that apply to `rule`, first axis outermost.
// Unset parameters default to r = rho = alpha = gamma = 0, beta = 1.
std::vector<RuleParams> expand_grid(const std::string& rule, const std::vector<GridAxis>& axes);

// Rule names: standard, subtractive, impression, two-param, optimal. The
// optimal rule ranks by w psi with psi built per bidder from the scenario's
// value distributions; rho is its score reserve.
RankingRule make_rule(const RuleParams& p, const Scenario& sc);

struct SweepRow {
  RuleParams params;
  MetricsEstimate estimate;
  std::uint64_t seed = 0;
  std::string error;  // non-empty when the point could not be evaluated
};

std::vector<SweepRow> run_sweep(const Scenario& sc, const std::vector<std::string>& rules,
                                const std::vector<GridAxis>& axes, Pricing pricing,
                                const EstimatorConfig& est);

// Pareto-filtered sweep rows on the given axes.
std::vector<SweepRow> frontier_rows(const std::vector<SweepRow>& rows, Axis x, Axis y);

extern const char* const kSweepHeader;
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& is);

Pricing parse_pricing(const std::string& name);

// ---- replay -----------------------------------------------------------------

struct ReplayRecord {
  std::string auction_id;
  std::string bidder_id;
  double bid = 0.0;
  double weight = 1.0;
};

struct ReplayLog {
  // Auctions in order of first appearance.
  std::vector<std::vector<ReplayRecord>> auctions;
  std::size_t skipped = 0;  // malformed lines
};

// CSV with header auction_id,bidder_id,bid,weight.
ReplayLog read_replay_log(std::istream& is);

struct ReplayRow {
  RuleParams params;
  std::size_t auctions = 0;
  double impressions = 0.0;  // per auction
  double clicks = 0.0;
  double revenue = 0.0;
};

// Bids taken as given; GSP outcome of each auction under each rule point.
std::vector<ReplayRow> run_replay(const ReplayLog& log, const std::vector<std::string>& rules,
                                  const std::vector<GridAxis>& axes, const SlotLayout& slots);
void write_replay_csv(std::ostream& os, const std::vector<ReplayRow>& rows);

// ---- ad cap -----------------------------------------------------------------

struct AdCapConfig {
  AdCapProblem problem;
  double tol = 1e-9;
};

AdCapConfig parse_adcap(const std::string& json_text);
AdCapConfig load_adcap(const std::string& path);
// JSON report: lambda, achieved, objective, per-term reserves, metrics.
std::string adcap_report(const AdCapSolution& s);

// ---- exit codes -------------------------------------------------------------

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNotReproduced = 3 };

// Human-readable report for a counterexample run.
std::string format_report(const CounterexampleReport& r);

}  // namespace adtrade
