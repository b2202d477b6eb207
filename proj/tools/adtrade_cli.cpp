// adtrade command line: sweeps, frontiers, ad caps, template SNE searches,
// log replay and the template counterexamples.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "adtrade/errors.hpp"
#include "adtrade/harness.hpp"

using namespace adtrade;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Name parsing failures are usage errors, not data errors.
template <class F>
auto usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + out + "'");
  f << text;
}

Axis parse_axis(const std::string& s, Sense def) {
  const auto colon = s.find(':');
  Axis a;
  a.metric = parse_metric(s.substr(0, colon));
  a.sense = def;
  if (colon != std::string::npos) {
    const std::string sense = s.substr(colon + 1);
    if (sense == "min") a.sense = Sense::Minimize;
    else if (sense == "max") a.sense = Sense::Maximize;
    else throw ConfigError("axis sense must be min or max");
  }
  return a;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(parse_grid_values(tok).at(0));
  return v;
}

struct SweepArgs {
  std::string scenario;
  std::vector<std::string> rules{"standard"};
  std::vector<std::string> grids;
  std::size_t samples = 10000;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  std::string pricing = "truthful";
  std::size_t batch = 1024;
};

void add_sweep_flags(CLI::App* cmd, SweepArgs& a) {
  cmd->add_option("--scenario", a.scenario, "preset name or scenario JSON path")->required();
  cmd->add_option("--rule", a.rules, "standard, subtractive, impression, two-param, optimal (repeatable)");
  cmd->add_option("--grid", a.grids, "[rule.]param=start:stop:count or param=value (repeatable)");
  cmd->add_option("--samples", a.samples, "Monte Carlo samples per grid point");
  cmd->add_option("--seed", a.seed, "overrides the scenario seed");
  cmd->add_option("--out", a.out, "output path (default stdout)");
  cmd->add_option("--threads", a.threads, "worker threads, 0 = all cores");
  cmd->add_option("--pricing", a.pricing, "truthful or lowest-sne-gsp");
  cmd->add_option("--batch", a.batch, "samples per batch");
}

std::vector<SweepRow> do_sweep(const SweepArgs& a) {
  std::vector<GridAxis> axes;
  for (const auto& g : a.grids) axes.push_back(usage([&] { return parse_grid_axis(g); }));
  for (const auto& r : a.rules) usage([&] { expand_grid(r, {}); });
  const Pricing pricing = usage([&] { return parse_pricing(a.pricing); });
  const ScenarioConfig cfg = load_scenario(a.scenario);
  if (cfg.scenario.bidders.empty()) throw ConfigError("scenario has no continuous bidders");
  EstimatorConfig est;
  est.samples = a.samples;
  est.seed = a.seed.value_or(cfg.seed);
  est.threads = a.threads;
  est.batch = a.batch;
  return run_sweep(cfg.scenario, a.rules, axes, pricing, est);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-score ad auction simulator"};
  app.require_subcommand(1);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "metrics over a rule parameter grid (CSV)");
  add_sweep_flags(sweep_cmd, sweep);

  SweepArgs front;
  std::string x_axis = "impressions:min", y_axis = "revenue:max";
  auto* front_cmd = app.add_subcommand("frontier", "Pareto-filtered sweep (CSV)");
  add_sweep_flags(front_cmd, front);
  front_cmd->add_option("--x", x_axis, "metric[:min|max] for the x axis");
  front_cmd->add_option("--y", y_axis, "metric[:min|max] for the y axis");

  std::string adcap_config, adcap_out;
  std::optional<double> adcap_cap, adcap_tol;
  std::size_t adcap_samples = 100000;
  std::uint64_t adcap_seed = 1;
  unsigned adcap_threads = 1;
  auto* adcap_cmd = app.add_subcommand("adcap", "per-impression reserve meeting an ad cap (JSON)");
  adcap_cmd->add_option("--config", adcap_config, "ad cap problem JSON")->required();
  adcap_cmd->add_option("--cap", adcap_cap, "overrides the cap in the config");
  adcap_cmd->add_option("--tol", adcap_tol, "overrides the tolerance in the config");
  adcap_cmd->add_option("--samples", adcap_samples, "samples per continuous term");
  adcap_cmd->add_option("--seed", adcap_seed);
  adcap_cmd->add_option("--threads", adcap_threads);
  adcap_cmd->add_option("--out", adcap_out);

  std::string sne_scenario, sne_pricing = "considerate", sne_selection = "standard", sne_out;
  std::size_t sne_points = 15;
  bool sne_nonconservative = false;
  double sne_upper = 1.5, sne_budget = 5e9;
  unsigned sne_threads = 1;
  auto* sne_cmd = app.add_subcommand("sne-search", "grid search for a template SNE (JSON)");
  sne_cmd->add_option("--scenario", sne_scenario, "scenario JSON with classes and templates")->required();
  sne_cmd->add_option("--pricing", sne_pricing, "considerate or indifferent");
  sne_cmd->add_option("--selection", sne_selection, "standard, top-capped or second-highest");
  sne_cmd->add_option("--points", sne_points, "grid points per bidder");
  sne_cmd->add_flag("--nonconservative", sne_nonconservative, "allow bids above value");
  sne_cmd->add_option("--upper-factor", sne_upper, "non-conservative grid top as a multiple of the max value");
  sne_cmd->add_option("--budget", sne_budget, "maximum number of grid profiles");
  sne_cmd->add_option("--threads", sne_threads);
  sne_cmd->add_option("--out", sne_out);

  std::string replay_log, replay_slots = "1,0.6,0.36", replay_scenario, replay_out;
  std::vector<std::string> replay_rules{"standard"}, replay_grids;
  auto* replay_cmd = app.add_subcommand("replay", "re-run logged bids under other rules (CSV)");
  replay_cmd->add_option("--log", replay_log, "CSV auction_id,bidder_id,bid,weight")->required();
  replay_cmd->add_option("--rule", replay_rules);
  replay_cmd->add_option("--grid", replay_grids);
  replay_cmd->add_option("--slots", replay_slots, "comma-separated slot effects");
  replay_cmd->add_option("--scenario", replay_scenario, "take the slots from this scenario");
  replay_cmd->add_option("--out", replay_out);

  std::string ce_name, ce_dump;
  CounterexampleParams ce;
  std::optional<double> ce_eps;
  std::optional<std::size_t> ce_grid;
  std::string ce_trend = "6,10,14";
  auto* ce_cmd = app.add_subcommand("counterexample", "rebuild and check a template counterexample");
  ce_cmd->add_option("name", ce_name, "non-implementation, tc-nonexistence, tc-unoptimal, ti-nonexistence")->required();
  ce_cmd->add_option("--eps", ce_eps);
  ce_cmd->add_option("--m", ce.m);
  ce_cmd->add_option("--delta", ce.delta);
  ce_cmd->add_option("--grid", ce_grid, "grid points per bidder (searches) or deviation grid");
  ce_cmd->add_option("--trend", ce_trend, "m values for tc-unoptimal");
  ce_cmd->add_option("--threads", ce.threads);
  ce_cmd->add_option("--dump-scenario", ce_dump, "write the instance as scenario JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sweep_cmd) {
      std::ostringstream os;
      write_sweep_csv(os, do_sweep(sweep));
      emit(sweep.out, os.str());
    } else if (*front_cmd) {
      const Axis x = usage([&] { return parse_axis(x_axis, Sense::Minimize); });
      const Axis y = usage([&] { return parse_axis(y_axis, Sense::Maximize); });
      std::ostringstream os;
      write_sweep_csv(os, frontier_rows(do_sweep(front), x, y));
      emit(front.out, os.str());
    } else if (*adcap_cmd) {
      AdCapConfig cfg = load_adcap(adcap_config);
      if (adcap_cap) cfg.problem.cap = *adcap_cap;
      if (adcap_tol) cfg.tol = *adcap_tol;
      EstimatorConfig est;
      est.samples = adcap_samples;
      est.seed = adcap_seed;
      est.threads = adcap_threads;
      emit(adcap_out, adcap_report(solve_ad_cap(cfg.problem, cfg.tol, est)) + "\n");
    } else if (*sne_cmd) {
      GridSearchOptions opt;
      opt.pricing = usage([&] {
        if (sne_pricing == "considerate") return TemplatePricing::Considerate;
        if (sne_pricing == "indifferent") return TemplatePricing::Indifferent;
        throw ConfigError("pricing must be considerate or indifferent");
      });
      opt.selection = usage([&] {
        if (sne_selection == "standard") return Selection::Standard;
        if (sne_selection == "top-capped") return Selection::TopCapped;
        if (sne_selection == "second-highest") return Selection::SecondHighest;
        throw ConfigError("selection must be standard, top-capped or second-highest");
      });
      opt.points = sne_points;
      opt.conservative = !sne_nonconservative;
      opt.upper_factor = sne_upper;
      opt.budget = sne_budget;
      opt.threads = sne_threads;
      const ScenarioConfig cfg = load_scenario(sne_scenario);
      if (!cfg.templates) throw ConfigError("scenario has no classes + templates block");
      const GridSearchResult res = sne_grid_search(*cfg.templates, opt);
      nlohmann::json j = {{"found", res.found.has_value()},
                          {"resolution", res.resolution},
                          {"profiles", res.profiles},
                          {"examined", res.examined}};
      if (res.found) j["bids"] = *res.found;
      emit(sne_out, j.dump(2) + "\n");
    } else if (*replay_cmd) {
      std::vector<GridAxis> axes;
      for (const auto& g : replay_grids) axes.push_back(usage([&] { return parse_grid_axis(g); }));
      for (const auto& r : replay_rules) usage([&] { expand_grid(r, {}); });
      SlotLayout slots = replay_scenario.empty() ? SlotLayout(usage([&] { return parse_list(replay_slots); }))
                                                 : load_scenario(replay_scenario).scenario.slots;
      std::ifstream in(replay_log);
      if (!in) throw ConfigError("cannot open '" + replay_log + "'");
      const ReplayLog log = read_replay_log(in);
      if (log.skipped > 0) std::cerr << "replay: skipped " << log.skipped << " malformed line(s)\n";
      std::cerr << "replay: " << log.auctions.size() << " auction(s)\n";
      std::ostringstream os;
      write_replay_csv(os, run_replay(log, replay_rules, axes, slots));
      emit(replay_out, os.str());
    } else if (*ce_cmd) {
      const CounterexampleKind kind = usage([&] { return parse_counterexample(ce_name); });
      ce.eps = ce_eps;
      ce.grid = ce_grid;
      ce.trend.clear();
      for (double m : usage([&] { return parse_list(ce_trend); })) ce.trend.push_back(static_cast<std::size_t>(m));
      const CounterexampleReport r = counterexample(kind, ce);
      if (!ce_dump.empty()) emit(ce_dump, scenario_json(r.game, r.name) + "\n");
      std::cout << format_report(r);
      return r.reproduced ? kExitOk : kExitNotReproduced;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
