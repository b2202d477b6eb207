#include <algorithm>
#include <cmath>
#include <sstream>

#include "adtrade/errors.hpp"
#include "adtrade/templates.hpp"

namespace adtrade {

namespace {

ClassedBidder bidder(std::size_t cls, double value) { return {cls, value, 1.0, value}; }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

void check_eps(double eps, double gap) {
  if (!(eps > 0.0) || eps > 1e-3 * gap) {
    std::ostringstream os;
    os << "eps must lie in (0, " << 1e-3 * gap << "]";
    throw ConfigError(os.str());
  }
}

double welfare(const TemplateGame& g, const TemplateOutcome& o) {
  double w = 0.0;
  for (std::size_t i = 0; i < g.bidders.size(); ++i)
    w += g.bidders[i].weight * g.bidders[i].value * o.effects[i];
  return w;
}

std::vector<PsiFunction> welfare_psi(std::size_t classes) {
  return std::vector<PsiFunction>(classes, PsiFunction::identity());
}

}  // namespace

CounterexampleKind parse_counterexample(const std::string& name) {
  if (name == "non-implementation") return CounterexampleKind::NonImplementation;
  if (name == "tc-nonexistence") return CounterexampleKind::TcNonexistence;
  if (name == "tc-unoptimal") return CounterexampleKind::TcUnoptimal;
  if (name == "ti-nonexistence") return CounterexampleKind::TiNonexistence;
  throw ConfigError("unknown counterexample '" + name +
                    "' (non-implementation, tc-nonexistence, tc-unoptimal, ti-nonexistence)");
}

std::string counterexample_name(CounterexampleKind k) {
  switch (k) {
    case CounterexampleKind::NonImplementation: return "non-implementation";
    case CounterexampleKind::TcNonexistence: return "tc-nonexistence";
    case CounterexampleKind::TcUnoptimal: return "tc-unoptimal";
    case CounterexampleKind::TiNonexistence: return "ti-nonexistence";
  }
  return "?";
}

// Text class 0 (values 100/50/25/10), image class 1 (120/110).
TemplateGame non_implementation_game(double eps) {
  check_eps(eps, 10.0);
  TemplateGame g;
  for (double v : {100.0, 50.0, 25.0, 10.0}) g.bidders.push_back(bidder(0, v));
  for (double v : {120.0, 110.0}) g.bidders.push_back(bidder(1, v));
  g.class_psi = welfare_psi(2);
  g.templates.num_classes = 2;
  g.templates.templates = {Template{{{1.0, 1.0 - eps, 1.0 - 2.0 * eps}, {}}},
                           Template{{{}, {1.0}}}};
  return g;
}

TemplateGame tc_nonexistence_game(double eps) {
  check_eps(eps, 50.0);
  TemplateGame g;
  for (std::size_t c = 0; c < 2; ++c)
    for (double v : {350.0, 300.0, 200.0, 100.0}) g.bidders.push_back(bidder(c, v));
  g.class_psi = welfare_psi(2);
  g.templates.num_classes = 2;
  const std::vector<double> big{1.0, 1.0 - eps, 1.0 - 2.0 * eps};
  const std::vector<double> small{eps, eps * eps, eps * eps * eps};
  g.templates.templates = {Template{{big, small}}, Template{{small, big}}};
  return g;
}

TemplateGame tc_unoptimal_game(std::size_t m, double eps) {
  if (m < 4) throw ConfigError("tc-unoptimal needs m >= 4");
  const double md = static_cast<double>(m);
  const std::size_t slots = 2 * m + m * m - 1;
  const double x = 2.0 * (2.0 * md - 1.0) / (2.0 * md + md * md);
  if (!(eps > 0.0) || eps > 1e-3 / (md * md) || x - static_cast<double>(slots) * eps <= 0.0)
    throw ConfigError("tc-unoptimal needs 0 < eps <= 1e-3 / m^2");
  TemplateGame g;
  for (std::size_t k = 1; k <= 2 * m; ++k)
    g.bidders.push_back(bidder(0, md / 2.0 - static_cast<double>(k) * eps));
  for (std::size_t k = 1; k <= m * m; ++k)
    g.bidders.push_back(bidder(0, 1.0 - static_cast<double>(k) * eps));
  g.class_psi = welfare_psi(1);
  g.templates.num_classes = 1;
  std::vector<double> t1, t2;
  for (std::size_t k = 1; k <= 2 * m; ++k) t1.push_back(1.0 - static_cast<double>(k) * eps);
  double p = 1.0;
  for (std::size_t k = 1; k < m * m; ++k) t1.push_back(p *= eps);
  for (std::size_t k = 1; k <= slots; ++k) t2.push_back(x - static_cast<double>(k) * eps);
  g.templates.templates = {Template{{t1}}, Template{{t2}}};
  return g;
}

// Class A 0 (100, 100-eps, 100-2eps, 20), class B 1 (150, 135).
TemplateGame ti_nonexistence_game(double delta, double eps) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  check_eps(eps, 15.0);
  TemplateGame g;
  for (double v : {100.0, 100.0 - eps, 100.0 - 2.0 * eps, 20.0}) g.bidders.push_back(bidder(0, v));
  for (double v : {150.0, 135.0}) g.bidders.push_back(bidder(1, v));
  g.class_psi = welfare_psi(2);
  g.templates.num_classes = 2;
  g.templates.templates = {Template{{{1.0, 0.5, 0.25}, {delta}}},
                           Template{{{delta, delta / 2.0, delta / 4.0}, {1.0}}}};
  return g;
}

namespace {

CounterexampleReport non_implementation(const CounterexampleParams& p) {
  CounterexampleReport r;
  const double eps = p.eps.value_or(1e-3);
  r.game = non_implementation_game(eps);
  r.claim = "a considerate-GSP SNE (text bids 0, image bids truthful) selects a template other "
            "than the truthful one";
  const auto& g = r.game;
  const TemplateOutcome truth = allocate_templates(g, g.values());
  r.bids = {0.0, 0.0, 0.0, 0.0, 120.0, 110.0};
  const TemplateOutcome sne = allocate_templates(g, r.bids);
  VerifyOptions vo;
  vo.deviation_grid = p.grid.value_or(1000);
  vo.conservative = true;
  const SneVerdict v = verify_template_sne(g, r.bids, TemplatePricing::Considerate, Selection::Standard, vo);
  const auto pay = truthful_template_payments(g, g.values(), 4000);
  const auto sne_prices = template_considerate_gsp(g, r.bids, sne);

  r.details.push_back("truthful template " + std::to_string(truth.chosen + 1) + ", objective " +
                      fmt(truth.objective));
  r.details.push_back("witness template " + std::to_string(sne.chosen + 1) + ", objective " +
                      fmt(sne.objective));
  r.details.push_back(v.ok ? "witness passes SNE verification (grid " +
                                 std::to_string(vo.deviation_grid) + ")"
                           : "witness fails SNE verification: " + v.violation);
  r.details.push_back("top text bidder truthful price " + fmt(pay[0]) + " (expected " +
                      fmt(45.0 + 100.0 * eps) + ")");
  r.details.push_back("winning image bidder pays " + fmt(sne_prices[4]));
  r.numbers = {{"eps", eps},
               {"truthful_template", static_cast<double>(truth.chosen + 1)},
               {"sne_template", static_cast<double>(sne.chosen + 1)},
               {"truthful_objective", truth.objective},
               {"sne_objective", sne.objective},
               {"top_text_truthful_price", pay[0]},
               {"image_winner_price", sne_prices[4]}};
  r.reproduced = v.ok && truth.chosen != sne.chosen;
  return r;
}

CounterexampleReport tc_nonexistence(const CounterexampleParams& p) {
  CounterexampleReport r;
  const double eps = p.eps.value_or(1e-3);
  r.game = tc_nonexistence_game(eps);
  r.claim = "no conservative grid SNE under considerate GSP";
  GridSearchOptions opt;
  opt.pricing = TemplatePricing::Considerate;
  opt.selection = Selection::Standard;
  opt.points = p.grid.value_or(15);
  opt.conservative = true;
  opt.threads = p.threads;
  const GridSearchResult res = sne_grid_search(r.game, opt);
  std::ostringstream os;
  os << "searched " << res.profiles << " profiles at " << opt.points << " points per bidder, "
     << res.examined << " survived the class envy filter";
  r.details.push_back(os.str());
  if (res.found) {
    r.bids = *res.found;
    r.details.push_back("found a grid SNE");
  } else {
    r.details.push_back("no grid SNE at this resolution");
  }
  r.numbers = {{"eps", eps},
               {"points", static_cast<double>(opt.points)},
               {"profiles", res.profiles},
               {"examined", res.examined}};
  r.reproduced = !res.found;
  return r;
}

struct UnoptimalPoint {
  bool verified = false;
  std::size_t truthful_template = 0;
  std::size_t sne_template = 0;
  double ratio = 0.0;
  std::string violation;
  std::vector<double> bids;
};

UnoptimalPoint tc_unoptimal_point(const TemplateGame& g, std::size_t grid) {
  UnoptimalPoint pt;
  const auto& t2 = g.templates.templates[1].class_effects[0];
  std::vector<BidderProfile> types;
  for (const auto& b : g.bidders) types.push_back({b.value, b.weight, b.value});
  pt.bids = lowest_sne_bids(RankingRule::standard(0.0), types, SlotLayout(t2));
  pt.bids[0] = g.bidders[0].value;

  const TemplateOutcome truth = allocate_templates(g, g.values());
  const TemplateOutcome sne = allocate_templates(g, pt.bids);
  pt.truthful_template = truth.chosen;
  pt.sne_template = sne.chosen;
  VerifyOptions vo;
  vo.deviation_grid = grid;
  vo.conservative = true;
  const SneVerdict v = verify_template_sne(g, pt.bids, TemplatePricing::Considerate, Selection::Standard, vo);
  pt.verified = v.ok;
  pt.violation = v.violation;
  pt.ratio = welfare(g, sne) / welfare(g, truth);
  return pt;
}

CounterexampleReport tc_unoptimal(const CounterexampleParams& p) {
  CounterexampleReport r;
  const double eps = p.eps.value_or(1e-6);
  const std::size_t grid = p.grid.value_or(200);
  r.claim = "a considerate-GSP SNE on the second template whose welfare ratio to the truthful "
            "template falls with m";
  r.game = tc_unoptimal_game(p.m, eps);
  const UnoptimalPoint main = tc_unoptimal_point(r.game, grid);
  r.bids = main.bids;
  r.numbers = {{"eps", eps}, {"m", static_cast<double>(p.m)}, {"ratio", main.ratio}};
  bool ok = main.verified && main.truthful_template == 0 && main.sne_template == 1;
  auto describe = [&](std::size_t m, const UnoptimalPoint& pt) {
    const double md = static_cast<double>(m);
    const double closed = 2.0 * (2.0 * md - 1.0) * (2.0 * md * md - 1.0) / ((2.0 * md + md * md) * md * md);
    std::ostringstream os;
    os << "m=" << m << ": truthful template " << pt.truthful_template + 1 << ", witness template "
       << pt.sne_template + 1 << ", " << (pt.verified ? "SNE verified" : "SNE check failed: " + pt.violation)
       << ", welfare ratio " << fmt(pt.ratio) << " (closed form " << fmt(closed) << ")";
    r.details.push_back(os.str());
  };
  describe(p.m, main);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : p.trend) {
    const UnoptimalPoint pt = m == p.m ? main : tc_unoptimal_point(tc_unoptimal_game(m, eps), grid);
    if (m != p.m) describe(m, pt);
    ok = ok && pt.verified && pt.truthful_template == 0 && pt.sne_template == 1 && pt.ratio < prev;
    prev = pt.ratio;
    r.numbers.push_back({"ratio_" + std::to_string(m), pt.ratio});
  }
  r.reproduced = ok;
  return r;
}

CounterexampleReport ti_nonexistence(const CounterexampleParams& p) {
  CounterexampleReport r;
  const double eps = p.eps.value_or(1e-4);
  const double delta = p.delta;
  r.game = ti_nonexistence_game(delta, eps);
  r.claim = "no conservative grid SNE under indifferent GSP with top-capped selection, and the "
            "third class-A bidder gains by raising the bid to 70";
  const auto& g = r.game;

  // Candidate profile at the edge of the envy-implied ranges.
  const double b2 = 80.0 - eps, b3 = 60.0 - eps;
  std::vector<double> cand{b2, b2, b3, 20.0, 150.0, 135.0};
  const Selection sel = Selection::TopCapped;
  const TemplateOutcome before = run_template_auction(g, cand, sel, TemplatePricing::Indifferent);
  std::vector<double> dev = cand;
  dev[2] = 70.0;
  const TemplateOutcome after = run_template_auction(g, dev, sel, TemplatePricing::Indifferent);
  const double gap = after.template_values[0] - after.template_values[1];
  const double expected = (1.0 - delta) * (2.5 - 1.5 * eps);
  const double t3 = g.bidders[2].value;
  const double u_before = before.effects[2] * (t3 - before.prices[2]);
  const double u_after = after.effects[2] * (t3 - after.prices[2]);
  const bool profitable = u_after > u_before;

  GridSearchOptions opt;
  opt.pricing = TemplatePricing::Indifferent;
  opt.selection = sel;
  opt.points = p.grid.value_or(25);
  opt.conservative = true;
  opt.threads = p.threads;
  const std::vector<double> anchors{60.0 - eps, 60.0 - eps / 2.0, 70.0, 80.0 - eps, 80.0 - eps / 4.0};
  opt.anchors = {anchors, anchors, anchors, anchors, {135.0}, {135.0}};
  const GridSearchResult res = sne_grid_search(g, opt);

  std::ostringstream os;
  os << "candidate selects template " << before.chosen + 1 << "; after raising to 70 template "
     << after.chosen + 1 << " with objective gap " << fmt(gap) << " (expected " << fmt(expected)
     << ")";
  r.details.push_back(os.str());
  r.details.push_back("third bidder utility " + fmt(u_before) + " -> " + fmt(u_after));
  r.details.push_back("class B winner pays " + fmt(before.prices[4]));
  std::ostringstream gs;
  gs << "searched " << res.profiles << " profiles (" << opt.points
     << " points per bidder plus anchors), " << res.examined << " survived the class envy filter; "
     << (res.found ? "found a grid SNE" : "no grid SNE at this resolution");
  r.details.push_back(gs.str());
  if (res.found) r.bids = *res.found;
  r.numbers = {{"eps", eps},
               {"delta", delta},
               {"gap_after_deviation", gap},
               {"expected_gap", expected},
               {"utility_before", u_before},
               {"utility_after", u_after},
               {"class_b_price", before.prices[4]},
               {"points", static_cast<double>(opt.points)},
               {"profiles", res.profiles},
               {"examined", res.examined}};
  r.reproduced = !res.found && profitable && gap > 0.0 && before.chosen == 1 && after.chosen == 0;
  return r;
}

}  // namespace

CounterexampleReport counterexample(CounterexampleKind kind, const CounterexampleParams& p) {
  CounterexampleReport r;
  switch (kind) {
    case CounterexampleKind::NonImplementation: r = non_implementation(p); break;
    case CounterexampleKind::TcNonexistence: r = tc_nonexistence(p); break;
    case CounterexampleKind::TcUnoptimal: r = tc_unoptimal(p); break;
    case CounterexampleKind::TiNonexistence: r = ti_nonexistence(p); break;
  }
  r.name = counterexample_name(kind);
  return r;
}

}  // namespace adtrade
